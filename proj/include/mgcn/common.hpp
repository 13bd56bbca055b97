#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgcn {

using Real = double;
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// One nonzero of a sparse row: column index and value.
struct SparseEntry {
  int col = 0;
  Real value = 0.0;
};

// Row-wise sparse matrix, entries ascending by column within each row.
using SparseRows = std::vector<std::vector<SparseEntry>>;

// Numbers are printed at 17 significant digits so text formats round-trip
// doubles bit-faithfully.
std::string real_to_text(Real v);
Real text_to_real(const std::string& s);

}  // namespace mgcn
