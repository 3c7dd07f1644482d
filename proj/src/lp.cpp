#include "dpsched/lp.hpp"

#include <cmath>

namespace dpsched::lp {

const char* to_string(LpStatus status) {
    switch (status) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    }
    return "Unknown";
}

Matrix MuMap::apply(const Matrix& occupancy) const {
    const int n = (buffer_size + 1) * states;
    const Vector y = Eigen::Map<const Vector>(occupancy.data(), n);
    const Vector mu = g * y;
    return Eigen::Map<const Matrix>(mu.data(), buffer_size + 1, states);
}

namespace {

// Rows of the tail balance system M mu = N y, one per (q, s').
void balance_system(const Matrix& p, double theta, int k, Matrix& m, Matrix& nmat) {
    const int states = static_cast<int>(p.rows());
    const int n = (k + 1) * states;
    auto idx = [k](int q, int s) { return s * (k + 1) + q; };
    m = Matrix::Zero(n, n);
    nmat = Matrix::Zero(n, n);
    for (int q = 0; q <= k; ++q) {
        for (int s2 = 0; s2 < states; ++s2) {
            const int row = idx(q, s2);
            for (int s = 0; s < states; ++s) {
                m(row, idx(q, s)) += p(s, s2) * theta;
                for (int i = q + 1; i <= k; ++i) m(row, idx(i, s)) += p(s, s2);
                nmat(row, idx(q, s)) += p(s, s2);
            }
            for (int i = q + 1; i <= k; ++i) m(row, idx(i, s2)) -= 1.0;
        }
    }
}

MuMap recursion_map(const Matrix& p, double theta, int k) {
    const int states = static_cast<int>(p.rows());
    const int n = (k + 1) * states;
    MuMap out;
    out.buffer_size = k;
    out.states = states;
    out.g = Matrix::Zero(n, n);

    // mu_q = ((P')^{-1} - I) T_q / theta + y_q / theta
    const Matrix pt_inv = p.transpose().fullPivLu().inverse();
    const Matrix step = pt_inv - Matrix::Identity(states, states);
    Matrix tail = Matrix::Zero(states, n);
    for (int q = k; q >= 0; --q) {
        Matrix mu_q = step * tail;
        for (int s = 0; s < states; ++s) mu_q(s, s * (k + 1) + q) += 1.0;
        mu_q /= theta;
        for (int s = 0; s < states; ++s) out.g.row(s * (k + 1) + q) = mu_q.row(s);
        tail += mu_q;
    }
    return out;
}

MuMap least_squares_map(const Matrix& p, double theta, int k) {
    const int states = static_cast<int>(p.rows());
    const int n = (k + 1) * states;
    Matrix m, nmat;
    balance_system(p, theta, k, m, nmat);
    Matrix m_full = Matrix::Zero(n + k + 1, n);
    Matrix n_full = Matrix::Zero(n + k + 1, n);
    m_full.topRows(n) = m;
    n_full.topRows(n) = nmat;
    for (int q = 0; q <= k; ++q) {
        for (int s = 0; s < states; ++s) {
            m_full(n + q, s * (k + 1) + q) = 1.0;
            n_full(n + q, s * (k + 1) + q) = 1.0 / theta;
        }
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(m_full);
    qr.setThreshold(1e-10);
    if (qr.rank() < n)
        throw Error(ErrorCode::SingularTransition, "balance equations do not determine mu from y");
    MuMap out;
    out.buffer_size = k;
    out.states = states;
    out.used_fallback = true;
    out.g = qr.solve(n_full);
    const double resid = (m_full * out.g - n_full).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, n_full.cwiseAbs().maxCoeff());
    if (resid > 1e-8 * scale)
        throw Error(ErrorCode::SingularTransition, "balance equations are inconsistent under least squares");
    return out;
}

}  // namespace

MuMap build_mu_map(const ChannelModel& model, double arrival_rate, int buffer_size) {
    if (!(arrival_rate > 0.0 && arrival_rate < 1.0)) throw Error(ErrorCode::InvalidConfig, "arrival_rate outside (0,1)");
    if (buffer_size < 1) throw Error(ErrorCode::InvalidConfig, "buffer_size must be at least 1");
    const Matrix& p = model.transition();

    Eigen::JacobiSVD<Matrix> svd(p);
    const Vector sv = svd.singularValues();
    const bool invertible = sv(sv.size() - 1) > 1e-10 * sv(0);
    if (invertible) {
        MuMap map = recursion_map(p, arrival_rate, buffer_size);
        Matrix m, nmat;
        balance_system(p, arrival_rate, buffer_size, m, nmat);
        const double resid = (m * map.g - nmat).cwiseAbs().maxCoeff();
        const double scale = m.cwiseAbs().rowwise().sum().maxCoeff() * map.g.cwiseAbs().maxCoeff();
        if (resid <= 1e-12 * std::max(1.0, scale)) return map;
    }
    return least_squares_map(p, arrival_rate, buffer_size);
}

double balance_residual(const ChannelModel& model, double arrival_rate, const Matrix& mu, const Matrix& occupancy) {
    const Matrix& p = model.transition();
    const int k = static_cast<int>(mu.rows()) - 1;
    const int states = static_cast<int>(mu.cols());
    double worst = 0.0;
    Vector tail = Vector::Zero(states);
    for (int q = k; q >= 0; --q) {
        const Vector inflow = arrival_rate * mu.row(q).transpose() + tail - occupancy.row(q).transpose();
        const Vector lhs = p.transpose() * inflow;
        worst = std::max(worst, (lhs - tail).cwiseAbs().maxCoeff());
        tail += mu.row(q).transpose();
    }
    return worst;
}

LpProblem assemble_lp(const ChannelModel& model, const ProblemConfig& config, const MuMap& gmap,
                      Formulation formulation) {
    config.validate();
    const int k = config.buffer_size;
    const int states = model.states();
    if (gmap.buffer_size != k || gmap.states != states)
        throw Error(ErrorCode::InvalidInput, "mu map does not match the problem dimensions");
    const double theta = config.arrival_rate;
    const int n = (k + 1) * states;
    auto idx = [k](int q, int s) { return s * (k + 1) + q; };

    if (formulation == Formulation::Auto)
        formulation = gmap.g.cwiseAbs().maxCoeff() <= kReducedGLimit ? Formulation::Reduced : Formulation::Lifted;
    const bool lifted = formulation == Formulation::Lifted;

    LpProblem out;
    out.formulation = formulation;
    out.buffer_size = k;
    out.states = states;
    out.arrival_rate = theta;
    out.powers = model.powers();
    if (!lifted) out.g = gmap.g;

    const int cols = lifted ? 2 * n : n;
    const int rows = lifted ? 2 + states + 2 * n : 2 + states + 2 * n;
    out.channel_rows = 2;
    if (lifted) {
        out.balance_rows = 2 + states;
        out.coupling_rows = 2 + states + n;
    } else {
        out.coupling_rows = 2 + states;
        out.state_rows = 2 + states + n;
    }

    simplex::Problem& lp = out.program;
    lp.a = Matrix::Zero(rows, cols);
    lp.row_lo = Vector::Constant(rows, -simplex::kInf);
    lp.row_hi = Vector::Constant(rows, simplex::kInf);
    lp.col_lo = Vector::Zero(cols);
    lp.col_hi = Vector::Ones(cols);
    lp.cost = Vector::Zero(cols);

    // mu(q, s) as a row over the variables
    auto mu_row = [&](int q, int s) -> Vector {
        if (lifted) {
            Vector r = Vector::Zero(cols);
            r(n + idx(q, s)) = 1.0;
            return r;
        }
        return gmap.g.row(idx(q, s)).transpose();
    };

    for (int s = 0; s < states; ++s) {
        for (int q = 0; q <= k; ++q) {
            lp.cost(idx(q, s)) = q / (theta * theta);
            lp.a(out.power_row, idx(q, s)) = model.powers()(s);
            lp.a(out.mass_row, idx(q, s)) = 1.0;
            lp.a.row(out.channel_rows + s) += mu_row(q, s).transpose();
        }
    }
    lp.row_hi(out.power_row) = config.power_budget;
    lp.row_lo(out.mass_row) = lp.row_hi(out.mass_row) = theta;
    for (int s = 0; s < states; ++s) lp.row_lo(out.channel_rows + s) = lp.row_hi(out.channel_rows + s) = model.stationary()(s);

    if (lifted) {
        const Matrix& p = model.transition();
        for (int q = 0; q <= k; ++q) {
            for (int s2 = 0; s2 < states; ++s2) {
                const int row = out.balance_rows + idx(q, s2);
                for (int s = 0; s < states; ++s) {
                    lp.a(row, n + idx(q, s)) += p(s, s2) * theta;
                    for (int i = q + 1; i <= k; ++i) lp.a(row, n + idx(i, s)) += p(s, s2);
                    lp.a(row, idx(q, s)) -= p(s, s2);
                }
                for (int i = q + 1; i <= k; ++i) lp.a(row, n + idx(i, s2)) -= 1.0;
                lp.row_lo(row) = lp.row_hi(row) = 0.0;
            }
        }
    }

    for (int s = 0; s < states; ++s) {
        for (int q = 0; q <= k; ++q) {
            const int row = out.coupling_rows + idx(q, s);
            Vector r = Vector::Zero(cols);
            r(idx(q, s)) = 1.0;
            if (q < k) r -= (1.0 - theta) * mu_row(q + 1, s) + theta * mu_row(q, s);
            else r -= theta * mu_row(k, s);
            lp.a.row(row) = r.transpose();
            lp.row_hi(row) = 0.0;
            if (!lifted) {
                const int srow = out.state_rows + idx(q, s);
                lp.a.row(srow) = mu_row(q, s).transpose();
                lp.row_lo(srow) = 0.0;
                lp.row_hi(srow) = 1.0;
            }
        }
    }
    return out;
}

LpSolution solve_lp(const LpProblem& problem, double tolerance) {
    simplex::Options opts;
    opts.feasibility_tol = tolerance;
    opts.optimality_tol = tolerance;
    const simplex::Result res = simplex::solve(problem.program, opts);

    LpSolution out;
    out.certificate.primal_infeasibility = res.primal_infeasibility;
    out.certificate.dual_infeasibility = res.dual_infeasibility;
    out.certificate.phase1_residual = res.phase1_residual;
    out.certificate.iterations = res.iterations;
    switch (res.status) {
    case simplex::Status::Infeasible: out.status = LpStatus::Infeasible; return out;
    case simplex::Status::Unbounded:
        throw Error(ErrorCode::NumericalFailure, "LP reported unbounded although every variable is boxed");
    case simplex::Status::NumericalFailure:
        throw Error(ErrorCode::NumericalFailure, "simplex failed to certify a solution");
    case simplex::Status::Optimal: break;
    }

    const int k = problem.buffer_size;
    const int states = problem.states;
    const int n = problem.num_occupancy();
    const double theta = problem.arrival_rate;
    out.status = LpStatus::Optimal;

    Vector y = res.x.head(n).cwiseMax(0.0);
    Vector mu = problem.formulation == Formulation::Lifted ? Vector(res.x.segment(n, n)) : Vector(problem.g * y);
    for (int i = 0; i < n; ++i) {
        if (mu(i) < -tolerance)
            throw Error(ErrorCode::NumericalFailure, "LP solution has a markedly negative stationary probability");
        if (mu(i) < 0.0) mu(i) = 0.0;
    }
    out.occupancy = Eigen::Map<const Matrix>(y.data(), k + 1, states);
    out.distribution.mu = Eigen::Map<const Matrix>(mu.data(), k + 1, states);

    double delay = 0.0, queue = 0.0, power = 0.0;
    for (int s = 0; s < states; ++s) {
        for (int q = 0; q <= k; ++q) {
            delay += q * out.occupancy(q, s);
            queue += q * out.distribution.mu(q, s);
            power += problem.powers(s) * out.occupancy(q, s);
        }
    }
    out.objective_delay = delay / (theta * theta);
    out.avg_queue = queue;
    out.achieved_power = power;
    return out;
}

PolicyTable extract_policy(const LpSolution& solution, double arrival_rate, double tolerance) {
    if (solution.status != LpStatus::Optimal)
        throw Error(ErrorCode::InvalidInput, "cannot extract a policy from a non-optimal LP solution");
    const Matrix& mu = solution.distribution.mu;
    const Matrix& y = solution.occupancy;
    const int k = static_cast<int>(mu.rows()) - 1;
    const int states = static_cast<int>(mu.cols());
    const double theta = arrival_rate;

    Matrix f = Matrix::Zero(k + 1, states);
    for (int s = 0; s < states; ++s) {
        std::vector<char> reachable(k + 1, 0);
        int lowest_transmit = -1;
        int highest_reached = 0;
        for (int q = 1; q <= k; ++q) {
            const double reach = (1.0 - theta) * mu(q, s) + theta * mu(q - 1, s);
            if (reach <= tolerance) continue;
            reachable[q] = 1;
            highest_reached = q;
            double v = std::clamp(y(q - 1, s) / reach, 0.0, 1.0);
            if (v <= tolerance) v = 0.0;
            if (v >= 1.0 - tolerance) v = 1.0;
            f(q, s) = v;
            if (v > 0.0 && lowest_transmit < 0) lowest_transmit = q;
        }
        const int level = lowest_transmit > 0 ? lowest_transmit : highest_reached + 1;
        for (int q = 1; q <= k; ++q)
            if (!reachable[q]) f(q, s) = q >= level ? 1.0 : 0.0;
    }
    return PolicyTable(std::move(f));
}

LpSolution solve_delay_lp(const ChannelModel& model, const ProblemConfig& config, Formulation formulation) {
    config.validate();
    MuMap gmap;
    try {
        gmap = build_mu_map(model, config.arrival_rate, config.buffer_size);
    } catch (const Error& e) {
        // without G only the lifted form is available; its channel rows supply
        // the rank the balance equations lack
        if (e.code() != ErrorCode::SingularTransition || formulation == Formulation::Reduced) throw;
        gmap.buffer_size = config.buffer_size;
        gmap.states = model.states();
        formulation = Formulation::Lifted;
    }
    const LpProblem problem = assemble_lp(model, config, gmap, formulation);
    return solve_lp(problem, config.lp_tolerance);
}

}  // namespace dpsched::lp
