#pragma once

#include "dpsched/model.hpp"
#include "dpsched/simplex.hpp"

namespace dpsched::lp {

/// Linear map mu = G y between transmit occupancies and the joint stationary
/// law. Both vectors are flattened channel-major: index s * (K + 1) + q.
struct MuMap {
    Matrix g;
    int buffer_size = 0;
    int states = 0;
    bool used_fallback = false;  // true when built by least squares

    int index(int q, int s) const { return s * (buffer_size + 1) + q; }
    /// Applies G to a (K+1) x S occupancy table and returns the (K+1) x S law.
    Matrix apply(const Matrix& occupancy) const;
};

/// Builds G from the tail balance equations
///   sum_s P(s,s') [theta mu(q,s) + T_q(s) - y(q,s)] = T_q(s'),
///   T_q(s) = sum_{i>q} mu(i,s),
/// solved level by level from q = K down to 0. When P' is singular or the
/// recursion loses accuracy, the full system plus the per-level identity
/// sum_s y(q,s) = theta sum_s mu(q,s) is solved by least squares instead;
/// a rank-deficient system throws SingularTransition.
MuMap build_mu_map(const ChannelModel& model, double arrival_rate, int buffer_size);

/// Residual of the tail balance equations for a given (mu, y) pair.
double balance_residual(const ChannelModel& model, double arrival_rate, const Matrix& mu, const Matrix& occupancy);

/// Reduced: variables y only, mu = G y substituted into every row.
/// Lifted: variables (y, mu) with the balance equations as equality rows.
/// Auto picks Reduced unless G has entries above kReducedGLimit.
enum class Formulation { Auto, Reduced, Lifted };

inline constexpr double kReducedGLimit = 1e4;

struct LpProblem {
    simplex::Problem program;
    Formulation formulation = Formulation::Reduced;
    int buffer_size = 0;
    int states = 0;
    double arrival_rate = 0.0;
    Vector powers;
    Matrix g;  // copy of G for the reduced form (empty when lifted)

    // row layout
    int power_row = 0;
    int mass_row = 1;
    int channel_rows = 2;    // first of S rows
    int balance_rows = -1;   // first of (K+1) S rows, lifted only
    int coupling_rows = 0;   // first of (K+1) S rows
    int state_rows = -1;     // first of (K+1) S rows, reduced only

    int num_occupancy() const { return (buffer_size + 1) * states; }
};

/// minimize (1/theta^2) sum q y(q,s)
///   s.t.   sum X_s y(q,s) <= eps
///          sum y(q,s) = theta
///          sum_q mu(q,s) = rho_s                       for every s
///          0 <= y(q,s) <= (1-theta) mu(q+1,s) + theta mu(q,s)   (q < K)
///          0 <= y(K,s) <= theta mu(K,s)
///          0 <= mu(q,s) <= 1
LpProblem assemble_lp(const ChannelModel& model, const ProblemConfig& config, const MuMap& gmap,
                      Formulation formulation = Formulation::Auto);

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus status);

struct Certificate {
    double primal_infeasibility = 0.0;
    double dual_infeasibility = 0.0;
    double phase1_residual = 0.0;
    long iterations = 0;
};

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    Matrix occupancy;              // y, (K+1) x S
    JointDistribution distribution;
    double objective_delay = 0.0;  // (1/theta^2) sum q y(q,s)
    double avg_queue = 0.0;        // sum q mu(q,s)
    double achieved_power = 0.0;   // sum X_s y(q,s)
    Certificate certificate;
};

/// Solves the program. Infeasible instances come back with status
/// Infeasible and the phase-1 residual as certificate; Unbounded is
/// reported as NumericalFailure because every variable is boxed.
/// Negative mu entries no larger than `tolerance` are clamped to zero.
LpSolution solve_lp(const LpProblem& problem, double tolerance);

/// f(q+1, s) = y(q,s) / ((1-theta) mu(q+1,s) + theta mu(q,s)), clamped to
/// [0, 1]. Rows whose post-arrival state has probability <= tolerance are
/// extrapolated as a threshold: 1 at or above the lowest reachable level
/// that transmits in that channel state (or above every reachable level
/// when none does), 0 below.
PolicyTable extract_policy(const LpSolution& solution, double arrival_rate, double tolerance);

/// build_mu_map + assemble_lp + solve_lp in one call. When G does not exist
/// (singular P') the lifted form is used unless Reduced was requested, in
/// which case SingularTransition propagates.
LpSolution solve_delay_lp(const ChannelModel& model, const ProblemConfig& config,
                          Formulation formulation = Formulation::Auto);

}  // namespace dpsched::lp
