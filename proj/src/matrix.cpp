#include "teamcluster/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "teamcluster/error.hpp"

namespace teamcluster {

Matrix multiply(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorKind::Parameter, "matrix shapes do not conform");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Parameter,
          "matrix shapes differ");
  double worst = 0.0;
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  return worst;
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::EmptyInput: return "empty input";
    case ErrorKind::Degenerate: return "degenerate input";
    case ErrorKind::Unsplittable: return "unsplittable cluster";
    case ErrorKind::NoSignal: return "no signal";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

}  // namespace teamcluster
