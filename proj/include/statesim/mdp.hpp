#pragma once

// Finite Markov decision processes with dense reward and transition tables,
// plus validation and exact value iteration.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace statesim {

// Transition rows must sum to 1 within this tolerance; rows are never
// renormalized, out-of-tolerance input is rejected.
inline constexpr double kStochasticTol = 1e-9;

struct Mdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> rewards;      // indexed (s, a), row-major
    std::vector<double> transitions;  // indexed (s, a, s'), row-major
    std::vector<std::string> labels;  // optional; empty or one per state

    Mdp() = default;
    Mdp(int states, int actions)
        : n_states(states),
          n_actions(actions),
          rewards(static_cast<std::size_t>(states) * actions, 0.0),
          transitions(static_cast<std::size_t>(states) * actions * states, 0.0) {}

    double reward(int s, int a) const { return rewards[idx(s, a)]; }
    double& reward(int s, int a) { return rewards[idx(s, a)]; }

    double transition(int s, int a, int t) const { return transitions[idx(s, a) * n_states + t]; }
    double& transition(int s, int a, int t) { return transitions[idx(s, a) * n_states + t]; }

    std::span<const double> transition_row(int s, int a) const {
        return {transitions.data() + idx(s, a) * n_states, static_cast<std::size_t>(n_states)};
    }

private:
    std::size_t idx(int s, int a) const {
        return static_cast<std::size_t>(s) * n_actions + static_cast<std::size_t>(a);
    }
};

// Throws std::invalid_argument naming the first violated invariant.
inline void validate_mdp(const Mdp& mdp) {
    if (mdp.n_states <= 0) throw std::invalid_argument("mdp: n_states must be positive");
    if (mdp.n_actions <= 0) throw std::invalid_argument("mdp: n_actions must be positive");
    const std::size_t sa = static_cast<std::size_t>(mdp.n_states) * mdp.n_actions;
    if (mdp.rewards.size() != sa)
        throw std::invalid_argument("mdp: rewards size does not match n_states*n_actions");
    if (mdp.transitions.size() != sa * mdp.n_states)
        throw std::invalid_argument("mdp: transitions size does not match n_states*n_actions*n_states");
    if (!mdp.labels.empty() && mdp.labels.size() != static_cast<std::size_t>(mdp.n_states))
        throw std::invalid_argument("mdp: labels must be empty or one per state");

    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            if (!std::isfinite(mdp.reward(s, a)))
                throw std::invalid_argument("mdp: reward not finite at state " + std::to_string(s) +
                                            " action " + std::to_string(a));
            double sum = 0.0;
            for (int t = 0; t < mdp.n_states; ++t) {
                double p = mdp.transition(s, a, t);
                if (!std::isfinite(p))
                    throw std::invalid_argument("mdp: transition probability not finite at (s=" +
                                                std::to_string(s) + ", a=" + std::to_string(a) +
                                                ", s'=" + std::to_string(t) + ")");
                if (p < 0.0)
                    throw std::invalid_argument("mdp: negative transition probability at (s=" +
                                                std::to_string(s) + ", a=" + std::to_string(a) +
                                                ", s'=" + std::to_string(t) + ")");
                sum += p;
            }
            if (std::abs(sum - 1.0) > kStochasticTol)
                throw std::invalid_argument("mdp: transition row not stochastic at (s=" +
                                            std::to_string(s) + ", a=" + std::to_string(a) +
                                            "): sum = " + std::to_string(sum));
        }
    }
}

// Largest per-action reward gap over state pairs: max_a (max_s r - min_s r).
// Bounds every similarity metric by reward_span/(1-c).
inline double reward_span(const Mdp& mdp) {
    double span = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
        double lo = mdp.reward(0, a), hi = mdp.reward(0, a);
        for (int s = 1; s < mdp.n_states; ++s) {
            double r = mdp.reward(s, a);
            if (r < lo) lo = r;
            if (r > hi) hi = r;
        }
        if (hi - lo > span) span = hi - lo;
    }
    return span;
}

struct ValueFunction {
    std::vector<double> values;
    double gamma = 0.0;
    double residual = 0.0;  // Bellman residual of `values`, at most gamma*tol
};

// Exact value iteration from V=0 until successive iterates differ by at most
// tol in the sup norm. gamma < 1 guarantees geometric convergence, so there
// is no iteration cap.
inline ValueFunction value_iteration(const Mdp& mdp, double gamma, double tol) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("value_iteration: gamma must lie in (0, 1)");
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");

    const int n = mdp.n_states;
    std::vector<double> v(n, 0.0), next(n, 0.0);

    auto backup = [&](const std::vector<double>& cur, std::vector<double>& out) {
        double delta = 0.0;
        for (int s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < mdp.n_actions; ++a) {
                auto row = mdp.transition_row(s, a);
                double acc = 0.0;
                for (int t = 0; t < n; ++t) acc += row[t] * cur[t];
                double q = mdp.reward(s, a) + gamma * acc;
                if (q > best) best = q;
            }
            out[s] = best;
            double d = std::abs(best - cur[s]);
            if (d > delta) delta = d;
        }
        return delta;
    };

    double delta;
    do {
        delta = backup(v, next);
        v.swap(next);
    } while (delta > tol);

    // One extra backup to report the residual of the returned iterate.
    double residual = backup(v, next);
    return ValueFunction{std::move(v), gamma, residual};
}

}  // namespace statesim
