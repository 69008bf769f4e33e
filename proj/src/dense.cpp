#include "nref/dense.hpp"

#include <cmath>

namespace nref {

bool DenseMatrix::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void l2_normalize_rows(DenseMatrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        double sq = 0.0;
        for (double v : row) sq += v * v;
        if (sq <= 0.0) continue;
        const double inv = 1.0 / std::sqrt(sq);
        for (double& v : row) v *= inv;
    }
}

} // namespace nref
