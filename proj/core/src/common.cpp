#include "arrqp/common.hpp"

#include <atomic>
#include <iostream>

namespace arrqp {

namespace {

void stderr_sink(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::atomic<WarningSink> g_sink{&stderr_sink};

}  // namespace

const char* to_string(Side side) { return side == Side::User ? "user" : "service"; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void set_warning_sink(WarningSink sink) { g_sink.store(sink ? sink : &stderr_sink); }

void warn(const std::string& message) { g_sink.load()(message); }

}  // namespace arrqp
