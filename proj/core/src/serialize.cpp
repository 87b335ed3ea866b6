#include "arrqp/serialize.hpp"

#include <bit>
#include <fstream>
#include <map>

namespace arrqp {

static_assert(std::endian::native == std::endian::little, "binary dumps assume a little-endian host");

namespace {

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

}  // namespace

void write_matrix_binary(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_matrix_binary(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(m.size() * sizeof(double))) {
    throw FormatError("'" + path.string() + "' is shorter than " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " doubles");
  }
  return m;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

void save_matrix(const std::filesystem::path& stem, const Matrix& m, nlohmann::json meta) {
  if (meta.is_null()) meta = nlohmann::json::object();
  meta["rows"] = m.rows();
  meta["cols"] = m.cols();
  meta["dtype"] = "float64";
  meta["layout"] = "row-major";
  write_matrix_binary(with_ext(stem, ".bin"), m);
  write_json(with_ext(stem, ".json"), meta);
}

Matrix load_matrix(const std::filesystem::path& stem, nlohmann::json* meta) {
  auto j = read_json(with_ext(stem, ".json"));
  auto m = read_matrix_binary(with_ext(stem, ".bin"), j.at("rows").get<Eigen::Index>(),
                              j.at("cols").get<Eigen::Index>());
  if (meta) *meta = std::move(j);
  return m;
}

void save_parameters(const std::filesystem::path& stem, const std::vector<const nn::Parameter*>& params,
                     nlohmann::json meta) {
  std::ofstream out(with_ext(stem, ".bin"), std::ios::binary);
  if (!out) throw FormatError("cannot open '" + with_ext(stem, ".bin").string() + "' for writing");
  auto tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto* p : params) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    tensors.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()},
                       {"offset", offset}});
    offset += static_cast<std::size_t>(p->value.size());
  }
  nlohmann::json manifest = {{"format", "arrqp-params-v1"}, {"tensors", tensors}, {"meta", meta}};
  write_json(with_ext(stem, ".json"), manifest);
}

nlohmann::json load_parameters(const std::filesystem::path& stem, const nn::ParameterList& params) {
  const auto manifest = read_json(with_ext(stem, ".json"));
  if (manifest.value("format", "") != "arrqp-params-v1") {
    throw FormatError("'" + stem.string() + ".json' is not an arrqp parameter manifest");
  }
  std::ifstream in(with_ext(stem, ".bin"), std::ios::binary);
  if (!in) throw FormatError("cannot open '" + with_ext(stem, ".bin").string() + "'");
  std::map<std::string, nlohmann::json> by_name;
  for (const auto& t : manifest.at("tensors")) by_name[t.at("name").get<std::string>()] = t;
  for (auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw FormatError("parameter '" + p->name + "' missing from manifest");
    const auto rows = it->second.at("rows").get<Eigen::Index>();
    const auto cols = it->second.at("cols").get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw FormatError("parameter '" + p->name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " in file, expected " + std::to_string(p->value.rows()) +
                        "x" + std::to_string(p->value.cols()));
    }
    in.seekg(static_cast<std::streamoff>(it->second.at("offset").get<std::size_t>() * sizeof(double)));
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!in) throw FormatError("parameter file truncated while reading '" + p->name + "'");
    p->zero_grad();
  }
  return manifest.at("meta");
}

}  // namespace arrqp
