#include "arrqp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace arrqp {

const char* to_string(ParameterKind kind) {
  return kind == ParameterKind::ResponseTime ? "RT" : "TP";
}

ParameterKind parse_parameter_kind(const std::string& text) {
  if (text == "RT" || text == "rt") return ParameterKind::ResponseTime;
  if (text == "TP" || text == "tp") return ParameterKind::Throughput;
  throw std::invalid_argument("unknown QoS parameter kind '" + text + "' (expected RT or TP)");
}

// --- QosMatrix --------------------------------------------------------------------------------

QosMatrix::QosMatrix(std::size_t n_users, std::size_t n_services)
    : values_(Matrix::Zero(static_cast<Eigen::Index>(n_users), static_cast<Eigen::Index>(n_services))),
      mask_(decltype(mask_)::Zero(static_cast<Eigen::Index>(n_users),
                                  static_cast<Eigen::Index>(n_services))) {}

void QosMatrix::set(std::size_t i, std::size_t j, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument("observed QoS values must be finite and strictly positive");
  }
  if (!mask_(i, j)) ++observed_;
  mask_(i, j) = 1;
  values_(i, j) = v;
}

void QosMatrix::clear(std::size_t i, std::size_t j) {
  if (mask_(i, j)) --observed_;
  mask_(i, j) = 0;
  values_(i, j) = 0.0;
}

std::vector<Entry> QosMatrix::entries() const {
  std::vector<Entry> out;
  out.reserve(observed_);
  for (std::size_t i = 0; i < n_users(); ++i) {
    for (std::size_t j = 0; j < n_services(); ++j) {
      if (mask_(i, j)) out.push_back({i, j, values_(i, j)});
    }
  }
  return out;
}

std::vector<double> QosMatrix::qiv(Side side, std::size_t index) const {
  std::vector<double> out;
  if (side == Side::User) {
    for (std::size_t j = 0; j < n_services(); ++j) {
      if (mask_(index, j)) out.push_back(values_(index, j));
    }
  } else {
    for (std::size_t i = 0; i < n_users(); ++i) {
      if (mask_(i, index)) out.push_back(values_(i, index));
    }
  }
  return out;
}

std::size_t QosMatrix::invocation_count(Side side, std::size_t index) const {
  const auto idx = static_cast<Eigen::Index>(index);
  if (side == Side::User) return static_cast<std::size_t>(mask_.row(idx).cast<std::size_t>().sum());
  return static_cast<std::size_t>(mask_.col(idx).cast<std::size_t>().sum());
}

Matrix QosMatrix::mask_matrix() const { return mask_.cast<double>(); }

bool operator==(const QosMatrix& a, const QosMatrix& b) {
  return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
         a.mask_ == b.mask_ && a.values_ == b.values_;
}

// --- contexts ---------------------------------------------------------------------------------

void ContextTable::validate() const {
  if (region.size() != ids.size() || group.size() != ids.size()) {
    throw DimensionError("context table columns have different lengths");
  }
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (region[k] >= region_cardinality() || group[k] >= group_cardinality()) {
      throw DimensionError("context category index out of range at row " + std::to_string(k));
    }
  }
}

void Dataset::validate() const {
  user_context.validate();
  service_context.validate();
  if (user_context.size() != matrix.n_users()) {
    throw DimensionError("user list has " + std::to_string(user_context.size()) +
                         " rows but the QoS matrix has " + std::to_string(matrix.n_users()) +
                         " users");
  }
  if (service_context.size() != matrix.n_services()) {
    throw DimensionError("service list has " + std::to_string(service_context.size()) +
                         " rows but the QoS matrix has " + std::to_string(matrix.n_services()) +
                         " services");
  }
}

ContextTable trivial_context(Side kind, std::size_t count) {
  ContextTable t;
  t.kind = kind;
  t.region_names = {"r0"};
  t.group_names = {"g0"};
  for (std::size_t k = 0; k < count; ++k) {
    t.ids.push_back(std::to_string(k));
    t.region.push_back(0);
    t.group.push_back(0);
  }
  return t;
}

namespace {

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return in;
}

double parse_double(std::string_view token, std::size_t line) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("cannot parse numeric value '" + std::string(token) + "'", line);
  }
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    cols.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (!cols.empty() && !cols.back().empty() && cols.back().back() == '\r') cols.back().pop_back();
  return cols;
}

std::size_t intern(std::unordered_map<std::string, std::size_t>& index, std::vector<std::string>& names,
                   const std::string& key) {
  auto [it, inserted] = index.try_emplace(key, names.size());
  if (inserted) names.push_back(key);
  return it->second;
}

}  // namespace

QosMatrix read_qos_matrix(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::vector<double> row;
    std::string token;
    while (tokens >> token) row.push_back(parse_double(token, line_no));
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError("ragged QoS matrix: line " + std::to_string(line_no) + " has " +
                        std::to_string(row.size()) + " columns, expected " +
                        std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("QoS matrix file '" + path.string() + "' is empty");

  QosMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      // Non-positive cells (WS-DREAM uses -1 for failed invocations) are unobserved.
      if (rows[i][j] > 0.0) m.set(i, j, rows[i][j]);
    }
  }
  return m;
}

void write_qos_matrix(const std::filesystem::path& path, const QosMatrix& matrix) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  char buf[32];
  for (std::size_t i = 0; i < matrix.n_users(); ++i) {
    for (std::size_t j = 0; j < matrix.n_services(); ++j) {
      if (j) out << ' ';
      if (matrix.observed(i, j)) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), matrix.value(i, j));
        out.write(buf, ptr - buf);
      } else {
        out << "-1";
      }
    }
    out << '\n';
  }
}

ContextTable read_context_table(const std::filesystem::path& path, Side kind,
                                const ContextColumns& columns) {
  auto in = open_for_read(path);
  ContextTable t;
  t.kind = kind;
  std::unordered_map<std::string, std::size_t> regions, groups;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t needed = std::max({columns.id, columns.region, columns.group}) + 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) continue;  // header
    if (line.empty() || line == "\r" || line.front() == '=') continue;
    auto cols = split_tabs(line);
    if (cols.size() < needed) {
      throw FormatError("line " + std::to_string(line_no) + " of '" + path.string() + "' has " +
                        std::to_string(cols.size()) + " columns, expected at least " +
                        std::to_string(needed));
    }
    t.ids.push_back(cols[columns.id]);
    t.region.push_back(intern(regions, t.region_names, cols[columns.region]));
    t.group.push_back(intern(groups, t.group_names, cols[columns.group]));
  }
  return t;
}

Dataset load_wsdream(const std::filesystem::path& matrix_path,
                     const std::filesystem::path& user_list_path,
                     const std::filesystem::path& service_list_path, ParameterKind kind,
                     const ContextColumns& user_columns, const ContextColumns& service_columns) {
  Dataset d;
  d.matrix = read_qos_matrix(matrix_path);
  d.user_context = read_context_table(user_list_path, Side::User, user_columns);
  d.service_context = read_context_table(service_list_path, Side::Service, service_columns);
  d.kind = kind;
  d.validate();
  return d;
}

// --- split ------------------------------------------------------------------------------------

Split split(const QosMatrix& matrix, const SplitSpec& spec) {
  if (!(spec.train_percent > 0.0 && spec.train_percent < 100.0)) {
    throw std::invalid_argument("train percent must lie in (0, 100)");
  }
  if (!(spec.validation_percent_of_train >= 0.0 && spec.validation_percent_of_train < 100.0)) {
    throw std::invalid_argument("validation percent must lie in [0, 100)");
  }
  auto entries = matrix.entries();
  if (entries.size() < 5) throw std::invalid_argument("split needs at least 5 observed entries");

  std::mt19937_64 rng(spec.seed);
  std::shuffle(entries.begin(), entries.end(), rng);

  const auto total = entries.size();
  const auto n_fit = static_cast<std::size_t>(
      std::llround(spec.train_percent / 100.0 * static_cast<double>(total)));
  const auto n_val = static_cast<std::size_t>(
      std::llround(spec.validation_percent_of_train / 100.0 * static_cast<double>(n_fit)));

  Split s{QosMatrix(matrix.n_users(), matrix.n_services()),
          QosMatrix(matrix.n_users(), matrix.n_services()),
          QosMatrix(matrix.n_users(), matrix.n_services())};
  for (std::size_t k = 0; k < total; ++k) {
    const auto& e = entries[k];
    QosMatrix& target = k < n_fit - n_val ? s.train : (k < n_fit ? s.validation : s.test);
    target.set(e.user, e.service, e.value);
  }
  return s;
}

DatasetSummary summarize(const Dataset& dataset) {
  DatasetSummary s;
  s.n_users = dataset.matrix.n_users();
  s.n_services = dataset.matrix.n_services();
  s.user_regions = dataset.user_context.region_cardinality();
  s.user_groups = dataset.user_context.group_cardinality();
  s.service_regions = dataset.service_context.region_cardinality();
  s.service_groups = dataset.service_context.group_cardinality();
  auto entries = dataset.matrix.entries();
  s.observed = entries.size();
  if (entries.empty()) return s;
  std::vector<double> v;
  v.reserve(entries.size());
  for (const auto& e : entries) v.push_back(e.value);
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  const auto half = v.size() / 2;
  s.median = v.size() % 2 ? v[half] : 0.5 * (v[half - 1] + v[half]);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(v.size()));
  return s;
}

// --- JSON -------------------------------------------------------------------------------------

namespace {

nlohmann::json context_to_json(const ContextTable& t) {
  return {{"kind", to_string(t.kind)},   {"ids", t.ids},
          {"region", t.region},          {"group", t.group},
          {"region_names", t.region_names}, {"group_names", t.group_names}};
}

ContextTable context_from_json(const nlohmann::json& j) {
  ContextTable t;
  t.kind = j.at("kind").get<std::string>() == "user" ? Side::User : Side::Service;
  t.ids = j.at("ids").get<std::vector<std::string>>();
  t.region = j.at("region").get<std::vector<std::size_t>>();
  t.group = j.at("group").get<std::vector<std::size_t>>();
  t.region_names = j.at("region_names").get<std::vector<std::string>>();
  t.group_names = j.at("group_names").get<std::vector<std::string>>();
  return t;
}

nlohmann::json entries_to_json(const std::vector<Entry>& entries) {
  auto arr = nlohmann::json::array();
  for (const auto& e : entries) arr.push_back({e.user, e.service, e.value});
  return arr;
}

std::vector<Entry> entries_from_json(const nlohmann::json& j) {
  std::vector<Entry> out;
  for (const auto& e : j) out.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(),
                                         e.at(2).get<double>()});
  return out;
}

}  // namespace

nlohmann::json to_json(const Dataset& dataset) {
  return {{"n_users", dataset.matrix.n_users()},
          {"n_services", dataset.matrix.n_services()},
          {"parameter_kind", to_string(dataset.kind)},
          {"entries", entries_to_json(dataset.matrix.entries())},
          {"user_context", context_to_json(dataset.user_context)},
          {"service_context", context_to_json(dataset.service_context)}};
}

nlohmann::json to_json(const GroundTruth& truth) {
  return {{"outliers", entries_to_json(truth.outliers)},
          {"greysheep_users", truth.greysheep_users},
          {"cold_users", truth.cold_users},
          {"cold_services", truth.cold_services},
          {"cold_entries", entries_to_json(truth.cold_entries)}};
}

Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset d;
  d.matrix = QosMatrix(j.at("n_users").get<std::size_t>(), j.at("n_services").get<std::size_t>());
  for (const auto& e : entries_from_json(j.at("entries"))) d.matrix.set(e.user, e.service, e.value);
  d.kind = parse_parameter_kind(j.at("parameter_kind").get<std::string>());
  d.user_context = context_from_json(j.at("user_context"));
  d.service_context = context_from_json(j.at("service_context"));
  d.validate();
  return d;
}

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  GroundTruth t;
  t.outliers = entries_from_json(j.at("outliers"));
  t.greysheep_users = j.at("greysheep_users").get<std::vector<std::size_t>>();
  t.cold_users = j.at("cold_users").get<std::vector<std::size_t>>();
  t.cold_services = j.at("cold_services").get<std::vector<std::size_t>>();
  t.cold_entries = entries_from_json(j.at("cold_entries"));
  return t;
}

void save_synthetic(const std::filesystem::path& path, const SyntheticDataset& data) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  nlohmann::json j = {{"dataset", to_json(data.dataset)}, {"ground_truth", to_json(data.truth)}};
  out << j.dump(1) << '\n';
}

SyntheticDataset load_synthetic(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  nlohmann::json j;
  try {
    in >> j;
    return {dataset_from_json(j.at("dataset")), ground_truth_from_json(j.at("ground_truth"))};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid synthetic dataset file '" + path.string() + "': " + e.what());
  }
}

}  // namespace arrqp
