#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "interlab/model.hpp"
#include "interlab/tensor.hpp"

namespace interlab {

// A cooperative game over "players" (perturbation cells). Membership is a
// flag vector sized players(); value({}) is the empty-coalition utility.
class Game {
public:
    virtual ~Game() = default;
    virtual std::size_t players() const = 0;
    virtual double value(const std::vector<std::uint8_t>& members) const = 0;
};

// Bitmask convenience for exact enumeration (players() <= 20).
double value_of_mask(const Game& g, std::uint32_t mask);

// Explicit value table indexed by bitmask. JSON form:
// {"players": P, "values": [v(mask 0), ..., v(mask 2^P-1)]}.
class TableGame : public Game {
public:
    TableGame(std::size_t players, std::vector<double> values);
    std::size_t players() const override { return players_; }
    double value(const std::vector<std::uint8_t>& members) const override;
    double value_at(std::uint32_t mask) const { return values_[mask]; }

    std::string to_json() const;
    static TableGame from_json(const std::string& text);

private:
    std::size_t players_;
    std::vector<double> values_;
};

// Evaluates every coalition of `g` into a table (players() <= 20).
TableGame materialize(const Game& g);

// v(S) = g . d^S + 0.5 d^S' H d^S + v0, where d^S keeps delta on members
// and zeroes elsewhere. H is symmetrized at construction. Interactions of
// this game are exactly delta_i H_ij delta_j, which makes it the reference
// fixture for estimator tests.
class QuadraticGame : public Game {
public:
    QuadraticGame(std::vector<double> lin, std::vector<std::vector<double>> hess,
                  std::vector<double> delta, double v0 = 0.0);
    std::size_t players() const override { return delta_.size(); }
    double value(const std::vector<std::uint8_t>& members) const override;

    const std::vector<std::vector<double>>& hessian() const { return hess_; }
    const std::vector<double>& delta() const { return delta_; }

private:
    std::vector<double> lin_;
    std::vector<std::vector<double>> hess_;
    std::vector<double> delta_;
    double v0_;
};

// Model-backed game: players are cells of a pixel partition, the coalition
// utility is the margin best-rival(x + d^S) - true(x + d^S). The empty
// value depends only on (model, x, y).
class CoalitionGame : public Game {
public:
    CoalitionGame(const Model& model, Tensor x, Tensor delta,
                  std::vector<std::vector<std::size_t>> cells, std::size_t y);
    std::size_t players() const override { return cells_.size(); }
    double value(const std::vector<std::uint8_t>& members) const override;

    const std::vector<std::vector<std::size_t>>& cells() const { return cells_; }

private:
    const Model* model_;
    Tensor x_;
    Tensor delta_;
    std::vector<std::vector<std::size_t>> cells_;
    std::size_t y_;
};

// Splits an height x width raster into side x side rectangular cells.
// When a dimension is not divisible, earlier rows/columns absorb the
// remainder, so cell extents differ by at most one pixel per axis.
struct GridPartition {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t side = 16;

    GridPartition() = default;
    GridPartition(std::size_t h, std::size_t w, std::size_t s);

    std::size_t cell_count() const { return side * side; }
    std::size_t cell_index(std::size_t p, std::size_t q) const;

    // Flat pixel indices per cell, row-major over (p, q).
    std::vector<std::vector<std::size_t>> cells() const;

    // Unordered 4-neighborhood pairs of cell indices.
    std::vector<std::pair<std::size_t, std::size_t>> adjacent_pairs() const;
};

struct SamplingPlan {
    std::size_t batches = 32;     // K
    std::size_t batch_size = 32;  // cells per batch
    std::uint64_t seed = 1;
};

enum class Estimator { closed_form, sampled, brute_force };

std::string to_string(Estimator e);

struct InteractionReport {
    double mean_interaction = 0.0;
    // closed form only: v(full) - v(full\{i}) - v({i}) + v(empty) per player.
    std::vector<double> per_player_terms;
    Estimator estimator = Estimator::closed_form;
    // Whether the 1/(P-1) normalization is included in mean_interaction.
    bool normalized = true;
    bool has_plan = false;
    SamplingPlan plan;

    std::string to_json() const;
};

}  // namespace interlab
