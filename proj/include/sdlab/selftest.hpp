#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdlab {

struct IdentityRow {
  std::string identity;
  int n = 0;
  int N = 0;
  int samples = 0;
  double max_residual = 0.0;
};

/// Checks the product, square, averaging and summation-by-parts identities of
/// the difference and average operators on `samples` random closures per
/// (n, N). Boundary values of the closures are random too.
std::vector<IdentityRow> calculus_selftest(const std::vector<int>& dims,
                                           const std::vector<int>& sizes, int samples,
                                           std::uint64_t seed);

}  // namespace sdlab
