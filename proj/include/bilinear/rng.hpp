#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace bilinear {

// Seeded random helpers. mt19937_64 has a standards-fixed output sequence,
// but the std:: distributions do not, so the mappings below are written out
// explicitly to keep seeded runs bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [-1, 1), using the top 53 bits of one engine draw.
  double uniform_pm1() {
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
  }

  // Uniform integer on [0, n). Rejection sampling: no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace bilinear
