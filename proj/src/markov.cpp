#include "dpsched/markov.hpp"

#include <numeric>
#include <queue>

namespace dpsched::markov {

namespace {

std::vector<int> bfs_levels(const Matrix& p, bool reverse) {
    const int n = static_cast<int>(p.rows());
    std::vector<int> level(n, -1);
    std::queue<int> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v = 0; v < n; ++v) {
            const double w = reverse ? p(v, u) : p(u, v);
            if (w > 0.0 && level[v] < 0) {
                level[v] = level[u] + 1;
                frontier.push(v);
            }
        }
    }
    return level;
}

}  // namespace

bool is_ergodic(const Matrix& transition) {
    const int n = static_cast<int>(transition.rows());
    if (n == 0 || transition.cols() != n) return false;

    const auto forward = bfs_levels(transition, false);
    const auto backward = bfs_levels(transition, true);
    for (int v = 0; v < n; ++v)
        if (forward[v] < 0 || backward[v] < 0) return false;

    // Period of an irreducible chain: gcd over edges u->v of level(u)+1-level(v).
    int period = 0;
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
            if (transition(u, v) > 0.0) period = std::gcd(period, std::abs(forward[u] + 1 - forward[v]));
    return period == 1;
}

Vector solve_stationary(const Matrix& transition) {
    const auto n = transition.rows();
    Matrix a = transition.transpose() - Matrix::Identity(n, n);
    a.row(n - 1).setOnes();
    Vector b = Vector::Zero(n);
    b(n - 1) = 1.0;

    Eigen::FullPivLU<Matrix> lu(a);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible())
        throw Error(ErrorCode::ReducibleClosedLoop, "stationary system is singular (more than one closed class)");
    Vector rho = lu.solve(b);
    // one step of iterative refinement
    rho += lu.solve(b - a * rho);

    for (Eigen::Index i = 0; i < n; ++i) {
        if (rho(i) < -1e-9)
            throw Error(ErrorCode::NumericalFailure, "stationary solve produced a negative probability");
        if (rho(i) < 0.0) rho(i) = 0.0;
    }
    rho /= rho.sum();
    return rho;
}

Vector stationary_distribution(const Matrix& transition) {
    if (!is_ergodic(transition)) throw Error(ErrorCode::NotErgodic, "chain is not irreducible and aperiodic");
    Vector rho = solve_stationary(transition);
    if (stationary_residual(transition, rho) > 1e-12)
        throw Error(ErrorCode::NumericalFailure, "stationary residual above 1e-12");
    return rho;
}

double stationary_residual(const Matrix& transition, const Vector& rho) {
    return (transition.transpose() * rho - rho).cwiseAbs().maxCoeff();
}

}  // namespace dpsched::markov
