#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "error.hpp"

namespace gk {

double max_asymmetry(const Eigen::MatrixXd& a) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < j; ++i) worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
    }
    return worst;
}

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& input, bool want_vectors, double tol, int max_sweeps) {
    if (input.rows() != input.cols()) fail(ErrorKind::invalid_argument, "eigensolver needs a square matrix");
    const Eigen::Index n = input.rows();
    Eigen::MatrixXd a = input;
    Eigen::MatrixXd v;
    if (want_vectors) v = Eigen::MatrixXd::Identity(n, n);

    const double norm2 = a.squaredNorm();
    const double target = tol * tol * norm2;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < j; ++i) off += 2.0 * a(i, j) * a(i, j);
        }
        if (off <= target) break;

        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (Eigen::Index k = 0; k < n; ++k) {
                    const double kp = a(k, p), kq = a(k, q);
                    a(k, p) = c * kp - s * kq;
                    a(k, q) = s * kp + c * kq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double pk = a(p, k), qk = a(q, k);
                    a(p, k) = c * pk - s * qk;
                    a(q, k) = s * pk + c * qk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                if (want_vectors) {
                    for (Eigen::Index k = 0; k < n; ++k) {
                        const double kp = v(k, p), kq = v(k, q);
                        v(k, p) = c * kp - s * kq;
                        v(k, q) = s * kp + c * kq;
                    }
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) < a(y, y); });

    SymmetricEigen out;
    out.values.resize(n);
    if (want_vectors) out.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        if (want_vectors) out.vectors.col(k) = v.col(order[k]);
    }
    return out;
}

}  // namespace gk
