#pragma once

#include "dpsched/model.hpp"

namespace dpsched::markov {

/// True iff the digraph of positive entries is strongly connected and has
/// period 1.
bool is_ergodic(const Matrix& transition);

/// Unique rho with rho P = rho and sum(rho) = 1, by a direct linear solve
/// where one balance equation is replaced by the normalization row.
/// Throws Error(NotErgodic) for chains without a unique stationary law.
Vector stationary_distribution(const Matrix& transition);

/// Same linear solve for any row-stochastic matrix that has exactly one
/// closed class (transient states get zero mass). Throws
/// Error(ReducibleClosedLoop) when the system is singular.
Vector solve_stationary(const Matrix& transition);

/// max_j |(rho P - rho)_j|
double stationary_residual(const Matrix& transition, const Vector& rho);

}  // namespace dpsched::markov
