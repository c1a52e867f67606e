#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "cpreg/multigraph.hpp"

namespace cpreg {

constexpr std::uint32_t kOracleMaxVertices = 12;

/* Contact process generator on the full 2^n state space of a multigraph.
   Infected vertices recover at rate 1; a healthy vertex is infected at rate
   lambda times the number of its infected neighbors counted with edge
   multiplicity. Loops never connect an infected to a healthy vertex. */
struct ContactGenerator {
    const Multigraph& g;
    double lambda;

    template <class Fn>
    void transitions(std::uint32_t state, Fn&& emit) const {
        for (std::uint32_t v = 0; v < g.n; ++v) {
            const std::uint32_t bit = 1u << v;
            if (state & bit) {
                emit(state & ~bit, 1.0);
            } else {
                std::uint32_t pressure = 0;
                for (std::uint32_t k = g.offsets[v]; k < g.offsets[v + 1]; ++k) {
                    const std::uint32_t w = g.nbr[k];
                    if (w != v && (state & (1u << w))) ++pressure;
                }
                if (pressure > 0) emit(state | bit, lambda * pressure);
            }
        }
    }

    double total_rate(std::uint32_t state) const {
        double q = 0.0;
        transitions(state, [&](std::uint32_t, double rate) { q += rate; });
        return q;
    }
};

inline void oracle_check_size(const Multigraph& g) {
    if (g.n == 0 || g.n > kOracleMaxVertices)
        throw std::invalid_argument("oracle: state space supports 1..12 vertices");
}

/* Expected absorption time at the empty state, by direct sparse solve of
   (-Q_TT) x = 1 over all non-empty states. Absorption is certain, so the
   system is a nonsingular M-matrix. */
inline double exact_extinction_expectation(const Multigraph& g, std::uint32_t initial_mask,
                                           double lambda) {
    oracle_check_size(g);
    const std::uint32_t states = 1u << g.n;
    if (initial_mask >= states) throw std::invalid_argument("oracle: bad initial mask");
    if (initial_mask == 0) return 0.0;

    ContactGenerator gen{g, lambda};
    const std::uint32_t m = states - 1;  // transient states s=1..states-1, index s-1
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m) * (g.n + 1));
    for (std::uint32_t s = 1; s < states; ++s) {
        double q = 0.0;
        gen.transitions(s, [&](std::uint32_t s2, double rate) {
            q += rate;
            if (s2 != 0) trip.emplace_back(static_cast<int>(s - 1), static_cast<int>(s2 - 1), -rate);
        });
        trip.emplace_back(static_cast<int>(s - 1), static_cast<int>(s - 1), q);
    }
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.analyzePattern(A);
    solver.factorize(A);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("oracle: factorization failed");
    Eigen::VectorXd b = Eigen::VectorXd::Ones(m);
    Eigen::VectorXd x = solver.solve(b);
    const double residual = (A * x - b).cwiseAbs().maxCoeff();
    if (!(residual <= 1e-10 * std::max(1.0, x.cwiseAbs().maxCoeff())))
        throw std::runtime_error("oracle: solve residual above tolerance");
    return x[initial_mask - 1];
}

namespace detail {

struct UniformizedKernel {
    std::uint32_t states;
    double rate_bound;
    std::vector<std::uint32_t> offsets;
    std::vector<std::pair<std::uint32_t, double>> entries;  // (target, probability)

    explicit UniformizedKernel(const Multigraph& g, double lambda) {
        states = 1u << g.n;
        ContactGenerator gen{g, lambda};
        rate_bound = 0.0;
        for (std::uint32_t s = 0; s < states; ++s)
            rate_bound = std::max(rate_bound, gen.total_rate(s));
        if (rate_bound == 0.0) rate_bound = 1.0;
        offsets.assign(states + 1, 0);
        std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(states);
        for (std::uint32_t s = 0; s < states; ++s) {
            double q = 0.0;
            gen.transitions(s, [&](std::uint32_t s2, double rate) {
                q += rate;
                rows[s].emplace_back(s2, rate / rate_bound);
            });
            rows[s].emplace_back(s, 1.0 - q / rate_bound);
        }
        for (std::uint32_t s = 0; s < states; ++s) offsets[s + 1] = offsets[s] + rows[s].size();
        entries.reserve(offsets[states]);
        for (auto& row : rows)
            for (auto& e : row) entries.push_back(e);
    }

    std::vector<double> step(const std::vector<double>& p) const {
        std::vector<double> out(states, 0.0);
        for (std::uint32_t s = 0; s < states; ++s) {
            if (p[s] == 0.0) continue;
            for (std::uint32_t k = offsets[s]; k < offsets[s + 1]; ++k)
                out[entries[k].first] += p[s] * entries[k].second;
        }
        return out;
    }

    /* Poisson-weighted sum of kernel powers; truncated when the remaining
       Poisson mass is below 1e-12. Long horizons are halved recursively to
       keep the k=0 weight in normal floating-point range. */
    std::vector<double> advance(std::vector<double> p, double t) const {
        if (t <= 0.0) return p;
        const double lt = rate_bound * t;
        if (lt > 200.0) return advance(advance(std::move(p), t / 2), t / 2);
        std::vector<double> acc(states, 0.0);
        double weight = std::exp(-lt);
        double cum = weight;
        for (std::uint32_t s = 0; s < states; ++s) acc[s] = weight * p[s];
        std::vector<double> v = std::move(p);
        for (std::uint64_t k = 1; cum < 1.0 - 1e-12; ++k) {
            v = step(v);
            weight *= lt / static_cast<double>(k);
            cum += weight;
            for (std::uint32_t s = 0; s < states; ++s) acc[s] += weight * v[s];
            if (k > 100000) throw std::runtime_error("oracle: uniformization did not converge");
        }
        return acc;
    }
};

}  // namespace detail

/* Distribution over all 2^n states at time t, by uniformization. */
inline std::vector<double> exact_marginal(const Multigraph& g, std::uint32_t initial_mask,
                                          double lambda, double t) {
    oracle_check_size(g);
    const std::uint32_t states = 1u << g.n;
    if (initial_mask >= states) throw std::invalid_argument("oracle: bad initial mask");
    detail::UniformizedKernel kernel(g, lambda);
    std::vector<double> p(states, 0.0);
    p[initial_mask] = 1.0;
    return kernel.advance(std::move(p), t);
}

/* Generic finite absorbing chain: transient states plus success/failure sinks.
   Solves hit probabilities and E[time * 1{success}] for small test chains. */
struct AbsorbingCtmc {
    explicit AbsorbingCtmc(std::size_t transient_states)
        : rates_(transient_states), to_success_(transient_states, 0.0),
          to_fail_(transient_states, 0.0) {}

    void add_rate(std::size_t from, std::size_t to, double rate) {
        rates_[from].emplace_back(to, rate);
    }
    void add_success_rate(std::size_t from, double rate) { to_success_[from] += rate; }
    void add_fail_rate(std::size_t from, double rate) { to_fail_[from] += rate; }

    struct Result {
        std::vector<double> p_success;
        std::vector<double> time_given_success;  // E[T | success]
    };

    Result solve() const {
        const std::size_t m = rates_.size();
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t i = 0; i < m; ++i) {
            double q = to_success_[i] + to_fail_[i];
            for (const auto& [j, rate] : rates_[i]) {
                q += rate;
                A(i, j) -= rate;
            }
            if (q <= 0.0) throw std::invalid_argument("AbsorbingCtmc: state with no exit");
            A(i, i) += q;
        }
        Eigen::VectorXd bs = Eigen::Map<const Eigen::VectorXd>(to_success_.data(), m);
        Eigen::VectorXd p = A.fullPivLu().solve(bs);
        Eigen::VectorXd mvec = A.fullPivLu().solve(p);
        Result out;
        out.p_success.assign(p.data(), p.data() + m);
        out.time_given_success.resize(m);
        for (std::size_t i = 0; i < m; ++i)
            out.time_given_success[i] = p[i] > 0.0 ? mvec[i] / p[i] : 0.0;
        return out;
    }

private:
    std::vector<std::vector<std::pair<std::size_t, double>>> rates_;
    std::vector<double> to_success_;
    std::vector<double> to_fail_;
};

}  // namespace cpreg
