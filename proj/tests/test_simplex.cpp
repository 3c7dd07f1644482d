#include "dpsched/simplex.hpp"

#include <doctest.h>

#include <functional>
#include <optional>
#include <random>

using namespace dpsched;
using simplex::kInf;

namespace {

struct Hyperplane {
    Vector normal;
    double offset;
};

// oracle for fully boxed problems: the optimum sits at a vertex, so try every
// choice of n tight constraints
std::optional<double> vertex_oracle(const simplex::Problem& p) {
    const auto n = p.a.cols();
    const auto m = p.a.rows();
    std::vector<Hyperplane> planes;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (std::isfinite(p.row_lo(i))) planes.push_back({p.a.row(i).transpose(), p.row_lo(i)});
        if (std::isfinite(p.row_hi(i))) planes.push_back({p.a.row(i).transpose(), p.row_hi(i)});
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector e = Vector::Zero(n);
        e(j) = 1.0;
        planes.push_back({e, p.col_lo(j)});
        planes.push_back({e, p.col_hi(j)});
    }
    std::optional<double> best;
    const int count = static_cast<int>(planes.size());
    std::vector<int> pick(n);
    std::function<void(int, int)> rec = [&](int depth, int start) {
        if (depth == n) {
            Matrix a(n, n);
            Vector b(n);
            for (int r = 0; r < n; ++r) {
                a.row(r) = planes[pick[r]].normal.transpose();
                b(r) = planes[pick[r]].offset;
            }
            Eigen::FullPivLU<Matrix> lu(a);
            if (lu.rank() < n) return;
            const Vector x = lu.solve(b);
            const Vector act = p.a * x;
            for (Eigen::Index j = 0; j < n; ++j)
                if (x(j) < p.col_lo(j) - 1e-9 || x(j) > p.col_hi(j) + 1e-9) return;
            for (Eigen::Index i = 0; i < m; ++i)
                if (act(i) < p.row_lo(i) - 1e-9 || act(i) > p.row_hi(i) + 1e-9) return;
            const double obj = p.cost.dot(x);
            if (!best || obj < *best) best = obj;
            return;
        }
        for (int i = start; i < count; ++i) {
            pick[depth] = i;
            rec(depth + 1, i + 1);
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace

TEST_CASE("simplex: textbook maximization") {
    simplex::Problem p;
    p.a.resize(2, 2);
    p.a << 1, 2, 3, 1;
    p.row_lo = Vector::Constant(2, -kInf);
    p.row_hi = Vector(2);
    p.row_hi << 4, 6;
    p.col_lo = Vector::Zero(2);
    p.col_hi = Vector::Constant(2, kInf);
    p.cost = Vector(2);
    p.cost << -1, -1;
    const auto r = simplex::solve(p);
    REQUIRE(r.status == simplex::Status::Optimal);
    CHECK(r.x(0) == doctest::Approx(1.6));
    CHECK(r.x(1) == doctest::Approx(1.2));
    CHECK(r.objective == doctest::Approx(-2.8));
    // duals of a maximization: both rows bind
    CHECK(r.primal_infeasibility <= 1e-9);
    CHECK(r.dual_infeasibility <= 1e-9);
}

TEST_CASE("simplex: equality and ranged rows") {
    simplex::Problem p;
    p.a.resize(2, 3);
    p.a << 1, 1, 1, 1, -1, 0;
    p.row_lo = Vector(2);
    p.row_hi = Vector(2);
    p.row_lo << 1, -0.25;
    p.row_hi << 1, 0.25;
    p.col_lo = Vector::Zero(3);
    p.col_hi = Vector::Ones(3);
    p.cost = Vector(3);
    p.cost << 1, 2, 3;
    const auto r = simplex::solve(p);
    REQUIRE(r.status == simplex::Status::Optimal);
    // as much x0 as the range allows: x0 - x1 = 0.25, x0 + x1 = 1
    CHECK(r.x(0) == doctest::Approx(0.625));
    CHECK(r.x(1) == doctest::Approx(0.375));
    CHECK(r.x(2) == doctest::Approx(0.0));
}

TEST_CASE("simplex: infeasible and unbounded") {
    simplex::Problem p;
    p.a.resize(1, 2);
    p.a << 1, 1;
    p.row_lo = Vector::Constant(1, 3.0);
    p.row_hi = Vector::Constant(1, kInf);
    p.col_lo = Vector::Zero(2);
    p.col_hi = Vector::Ones(2);
    p.cost = Vector::Ones(2);
    const auto r = simplex::solve(p);
    CHECK(r.status == simplex::Status::Infeasible);
    CHECK(r.phase1_residual > 0.5);

    p.row_lo(0) = 0.0;
    p.col_hi = Vector::Constant(2, kInf);
    p.cost << -1, 0;
    CHECK(simplex::solve(p).status == simplex::Status::Unbounded);
}

TEST_CASE("simplex: degenerate vertex") {
    // many constraints tight at the optimum (0, 0) and at (1, 0)
    simplex::Problem p;
    p.a.resize(4, 2);
    p.a << 1, 1, 1, 2, 2, 1, 1, -1;
    p.row_lo = Vector::Constant(4, -kInf);
    p.row_hi = Vector(4);
    p.row_hi << 1, 1, 2, 1;
    p.col_lo = Vector::Zero(2);
    p.col_hi = Vector::Ones(2);
    p.cost = Vector(2);
    p.cost << -1, -1;
    const auto r = simplex::solve(p);
    REQUIRE(r.status == simplex::Status::Optimal);
    CHECK(r.objective == doctest::Approx(-1.0));
}

TEST_CASE("simplex matches vertex enumeration on random boxed problems") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int optimal = 0, infeasible = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + trial % 3;
        const int m = 1 + trial % 4;
        simplex::Problem p;
        p.a = Matrix::NullaryExpr(m, n, [&] { return u(rng); });
        p.row_lo = Vector(m);
        p.row_hi = Vector(m);
        for (int i = 0; i < m; ++i) {
            const double a = u(rng), b = u(rng);
            const int kind = static_cast<int>(rng() % 4);
            p.row_lo(i) = kind == 0 ? -kInf : std::min(a, b);
            p.row_hi(i) = kind == 1 ? kInf : (kind == 2 ? p.row_lo(i) : std::max(a, b));
            if (kind == 0) p.row_hi(i) = a;
        }
        p.col_lo = Vector(n);
        p.col_hi = Vector(n);
        for (int j = 0; j < n; ++j) {
            p.col_lo(j) = u(rng);
            p.col_hi(j) = p.col_lo(j) + 0.1 + std::abs(u(rng));
        }
        p.cost = Vector::NullaryExpr(n, [&] { return u(rng); });

        const auto oracle = vertex_oracle(p);
        const auto r = simplex::solve(p);
        CAPTURE(trial);
        if (oracle) {
            ++optimal;
            REQUIRE(r.status == simplex::Status::Optimal);
            CHECK(std::abs(r.objective - *oracle) <= 1e-8);
            CHECK(r.primal_infeasibility <= 1e-9);
            CHECK(r.dual_infeasibility <= 1e-9);
        } else {
            ++infeasible;
            CHECK(r.status == simplex::Status::Infeasible);
        }
    }
    CHECK(optimal > 50);
    CHECK(infeasible > 10);
}
