#pragma once

// Built-in benchmark MDPs: the oriented gridworld family and the six-feature
// coffee-robot domain.

#include <stdexcept>
#include <string>

#include "statesim/mdp.hpp"

namespace statesim {

// Orientation encoding for gridworld states: 0=N, 1=E, 2=S, 3=W.
inline int gridworld_state(int n, int row, int col, int dir) {
    return (row * n + col) * 4 + dir;
}

// n x n grid, n odd, one state per (cell, orientation): 4*n^2 states.
// Action 0 moves one cell forward in the current orientation (bumping a wall
// leaves the state unchanged); action 1 rotates clockwise in place. Reward 1
// for either action taken in the center cell, 0 elsewhere. All transitions
// are deterministic.
inline Mdp make_gridworld(int n) {
    if (n < 1 || n % 2 == 0)
        throw std::invalid_argument("make_gridworld: n must be a positive odd integer");

    static constexpr int dr[4] = {-1, 0, 1, 0};  // N, E, S, W with row 0 at the top
    static constexpr int dc[4] = {0, 1, 0, -1};
    static constexpr char dir_name[4] = {'N', 'E', 'S', 'W'};

    Mdp mdp(4 * n * n, 2);
    mdp.labels.resize(mdp.n_states);
    const int center = n / 2;

    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            const double r = (row == center && col == center) ? 1.0 : 0.0;
            for (int dir = 0; dir < 4; ++dir) {
                const int s = gridworld_state(n, row, col, dir);
                mdp.labels[s] = "r" + std::to_string(row) + "c" + std::to_string(col) + ":" +
                                dir_name[dir];
                mdp.reward(s, 0) = r;
                mdp.reward(s, 1) = r;

                int nr = row + dr[dir], nc = col + dc[dir];
                if (nr < 0 || nr >= n || nc < 0 || nc >= n) {
                    nr = row;
                    nc = col;
                }
                mdp.transition(s, 0, gridworld_state(n, nr, nc, dir)) = 1.0;
                mdp.transition(s, 1, gridworld_state(n, row, col, (dir + 1) % 4)) = 1.0;
            }
        }
    }
    return mdp;
}

// Coffee-robot state features, one bit each; state index packs them with
// feature k at bit k, so there are 64 states.
enum CoffeeFeature {
    kAtCafe = 0,        // robot's location (1 = cafe, 0 = office)
    kHasUmbrella = 1,
    kRobotWet = 2,
    kRaining = 3,
    kRobotHasCoffee = 4,
    kUserHasCoffee = 5,
};

inline bool coffee_bit(int state, CoffeeFeature f) { return (state >> f) & 1; }

inline constexpr int kCoffeeGo = 0;
inline constexpr int kCoffeeBuy = 1;
inline constexpr int kCoffeeGetUmbrella = 2;
inline constexpr int kCoffeeDeliver = 3;

// 64 states, 4 actions. Dynamics:
//   go          flips the location bit with prob 0.9 (no effect otherwise);
//               a successful move in the rain without an umbrella also sets
//               robot-wet.
//   buy-coffee  sets robot-has-coffee with prob 0.9 when at the cafe.
//   get-umbrella sets has-umbrella with prob 0.9 when at the office.
//   deliver-coffee at the office with coffee in hand: prob 0.8 hands it over
//               (user-has-coffee set), prob 0.2 drops it; robot-has-coffee
//               clears either way.
// Reward for every action: 0.9 if the user has coffee plus 0.1 if the robot
// is dry. Rain, umbrella, and wetness persist otherwise.
inline Mdp make_coffee_robot() {
    Mdp mdp(64, 4);
    mdp.labels.resize(64);

    auto add = [&](int s, int a, int t, double p) { mdp.transition(s, a, t) += p; };

    for (int s = 0; s < 64; ++s) {
        mdp.labels[s] = std::string("cafe=") + (coffee_bit(s, kAtCafe) ? "1" : "0") +
                        ",umb=" + (coffee_bit(s, kHasUmbrella) ? "1" : "0") +
                        ",wet=" + (coffee_bit(s, kRobotWet) ? "1" : "0") +
                        ",rain=" + (coffee_bit(s, kRaining) ? "1" : "0") +
                        ",rhc=" + (coffee_bit(s, kRobotHasCoffee) ? "1" : "0") +
                        ",uhc=" + (coffee_bit(s, kUserHasCoffee) ? "1" : "0");

        const double r = 0.9 * (coffee_bit(s, kUserHasCoffee) ? 1.0 : 0.0) +
                         0.1 * (coffee_bit(s, kRobotWet) ? 0.0 : 1.0);
        for (int a = 0; a < 4; ++a) mdp.reward(s, a) = r;

        // go
        {
            int moved = s ^ (1 << kAtCafe);
            if (coffee_bit(s, kRaining) && !coffee_bit(s, kHasUmbrella))
                moved |= 1 << kRobotWet;
            add(s, kCoffeeGo, moved, 0.9);
            add(s, kCoffeeGo, s, 0.1);
        }
        // buy-coffee
        if (coffee_bit(s, kAtCafe)) {
            add(s, kCoffeeBuy, s | (1 << kRobotHasCoffee), 0.9);
            add(s, kCoffeeBuy, s, 0.1);
        } else {
            add(s, kCoffeeBuy, s, 1.0);
        }
        // get-umbrella
        if (!coffee_bit(s, kAtCafe)) {
            add(s, kCoffeeGetUmbrella, s | (1 << kHasUmbrella), 0.9);
            add(s, kCoffeeGetUmbrella, s, 0.1);
        } else {
            add(s, kCoffeeGetUmbrella, s, 1.0);
        }
        // deliver-coffee
        if (!coffee_bit(s, kAtCafe) && coffee_bit(s, kRobotHasCoffee)) {
            int base = s & ~(1 << kRobotHasCoffee);
            add(s, kCoffeeDeliver, base | (1 << kUserHasCoffee), 0.8);
            add(s, kCoffeeDeliver, base, 0.2);
        } else {
            add(s, kCoffeeDeliver, s, 1.0);
        }
    }
    return mdp;
}

}  // namespace statesim
