#pragma once

#include <cstdint>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pelab/errors.hpp"

namespace pelab {

/**
 * Deterministic gridworld: moves up/down/left/right, clipped at the walls,
 * each move costing move_reward (so with -1 the optimal policy is the
 * shortest path to a terminal). Terminal cells are absorbing with zero
 * reward. Cells are indexed row-major: cell = y * width + x.
 */
class GridWorld {
public:
    static constexpr int n_actions = 4;  // 0 up, 1 down, 2 left, 3 right

    GridWorld(int width, int height, std::set<int> terminal_cells, double move_reward = -1.0,
              double discount = 1.0)
        : width_(width),
          height_(height),
          terminal_(std::move(terminal_cells)),
          move_reward_(move_reward),
          discount_(discount) {
        detail::require(width_ >= 1 && height_ >= 1, "GridWorld: dimensions must be positive");
        detail::require(!terminal_.empty(), "GridWorld: needs at least one terminal cell");
        detail::require(discount_ > 0.0 && discount_ <= 1.0, "GridWorld: discount in (0, 1]");
        for (int cell : terminal_)
            detail::require(cell >= 0 && cell < n_cells(), "GridWorld: terminal cell out of range");
        check_terminal_reachability();
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int n_cells() const { return width_ * height_; }
    double discount() const { return discount_; }
    double move_reward() const { return move_reward_; }
    bool is_terminal(int cell) const { return terminal_.count(cell) > 0; }
    const std::set<int>& terminal_cells() const { return terminal_; }

    /// One environment step: (next_cell, reward). Terminal cells absorb.
    std::pair<int, double> apply(int cell, int action) const {
        detail::require(cell >= 0 && cell < n_cells(), "GridWorld: cell out of range");
        detail::require(action >= 0 && action < n_actions, "GridWorld: action out of range");
        if (is_terminal(cell)) return {cell, 0.0};
        int x = cell % width_;
        int y = cell / width_;
        switch (action) {
            case 0: y = y > 0 ? y - 1 : y; break;
            case 1: y = y < height_ - 1 ? y + 1 : y; break;
            case 2: x = x > 0 ? x - 1 : x; break;
            case 3: x = x < width_ - 1 ? x + 1 : x; break;
        }
        return {y * width_ + x, move_reward_};
    }

    static std::string action_name(int action) {
        switch (action) {
            case 0: return "up";
            case 1: return "down";
            case 2: return "left";
            case 3: return "right";
        }
        return "?";
    }

private:
    void check_terminal_reachability() const {
        // BFS backwards from the terminal set over the move graph.
        std::vector<bool> reached(n_cells(), false);
        std::queue<int> frontier;
        for (int cell : terminal_) {
            reached[cell] = true;
            frontier.push(cell);
        }
        // Predecessors: any cell whose move lands on a reached cell.
        while (!frontier.empty()) {
            frontier.pop();
            bool grew = false;
            for (int cell = 0; cell < n_cells(); ++cell) {
                if (reached[cell] || is_terminal(cell)) continue;
                for (int a = 0; a < n_actions; ++a) {
                    if (reached[apply(cell, a).first]) {
                        reached[cell] = true;
                        frontier.push(cell);
                        grew = true;
                        break;
                    }
                }
            }
            if (!grew) break;
        }
        for (int cell = 0; cell < n_cells(); ++cell)
            detail::require(reached[cell], "GridWorld: no terminal reachable from cell " +
                                               std::to_string(cell));
    }

    int width_;
    int height_;
    std::set<int> terminal_;
    double move_reward_;
    double discount_;
};

}  // namespace pelab
