#include "lfa/types.hpp"

#include <cstring>

#include "lfa/rng.hpp"

namespace lfa {

const char* to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::Bow: return "bow";
    case EncoderKind::T1: return "t1";
    case EncoderKind::T2: return "t2";
  }
  return "unknown";
}

EncoderKind encoder_kind_from_string(std::string_view name) {
  if (name == "bow") return EncoderKind::Bow;
  if (name == "t1") return EncoderKind::T1;
  if (name == "t2") return EncoderKind::T2;
  throw ContractError("unknown encoder kind: " + std::string(name));
}

void AggregatorParams::validate() const {
  if (codebook.centers.rows() < 1 || codebook.centers.cols() < 1) {
    throw ContractError("aggregator params: codebook must be at least 1 x 1");
  }
  if (precisions.log_precisions.rows() != codebook.centers.rows() ||
      precisions.log_precisions.cols() != codebook.centers.cols()) {
    throw ContractError("aggregator params: codebook and precision bank shapes differ");
  }
  if (!(gamma > 0.0)) {
    throw ContractError("aggregator params: gamma must be positive");
  }
  if (!codebook.centers.allFinite() || !precisions.log_precisions.allFinite()) {
    throw ContractError("aggregator params: non-finite entries");
  }
  if (kind == EncoderKind::Bow && !precisions.log_precisions.isZero(0.0)) {
    throw ContractError("aggregator params: Bow requires identity covariance (zero log-precisions)");
  }
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = kFnvOffset;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream) {
  return splitmix64(base ^ fnv1a(stream));
}

}  // namespace lfa
