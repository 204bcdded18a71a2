#pragma once

#include <Eigen/Dense>

namespace gk {

struct SymmetricEigen {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // column k pairs with values[k]
};

// Cyclic Jacobi rotations until the off-diagonal mass drops below
// tol * Frobenius norm. Input must be symmetric; only deterministic
// sequential arithmetic is used.
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, bool want_vectors, double tol = 1e-15,
                            int max_sweeps = 100);

double max_asymmetry(const Eigen::MatrixXd& a);

}  // namespace gk
