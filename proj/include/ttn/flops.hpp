#pragma once

#include <cstdint>

namespace ttn::flops {

// Thread-local multiply-add counter. The contraction and matrix-product
// helpers tick it; scoped reads give per-phase counts.
inline thread_local std::uint64_t counter = 0;

inline void add(std::uint64_t multiply_adds) { counter += multiply_adds; }

class Scope {
 public:
  Scope() : start_(counter) {}
  std::uint64_t elapsed() const { return counter - start_; }

 private:
  std::uint64_t start_;
};

}  // namespace ttn::flops
