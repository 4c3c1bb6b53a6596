#include "interlab/game.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "interlab/errors.hpp"

namespace interlab {

using nlohmann::json;

double value_of_mask(const Game& g, std::uint32_t mask) {
    std::size_t p = g.players();
    std::vector<std::uint8_t> members(p, 0);
    for (std::size_t i = 0; i < p; ++i)
        if (mask & (1u << i)) members[i] = 1;
    return g.value(members);
}

TableGame::TableGame(std::size_t players, std::vector<double> values)
    : players_(players), values_(std::move(values)) {
    if (players == 0 || players > 20)
        throw CapacityError("table game supports 1..20 players, got " +
                            std::to_string(players));
    if (values_.size() != (std::size_t(1) << players))
        throw ShapeError("table game needs 2^" + std::to_string(players) +
                         " values, got " + std::to_string(values_.size()));
}

double TableGame::value(const std::vector<std::uint8_t>& members) const {
    if (members.size() != players_)
        throw ShapeError("membership vector size mismatch");
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < players_; ++i)
        if (members[i]) mask |= 1u << i;
    return values_[mask];
}

std::string TableGame::to_json() const {
    json j;
    j["players"] = players_;
    j["values"] = values_;
    return j.dump();
}

TableGame TableGame::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw MalformedFileError(std::string("game table is not valid JSON: ") +
                                 e.what());
    }
    std::size_t players = 0;
    if (j.contains("players"))
        players = j.at("players").get<std::size_t>();
    else if (j.contains("P"))
        players = j.at("P").get<std::size_t>();
    else
        throw FormatError("game table missing player count");
    return TableGame(players, j.at("values").get<std::vector<double>>());
}

TableGame materialize(const Game& g) {
    std::size_t p = g.players();
    if (p > 20)
        throw CapacityError("cannot materialize a game with " +
                            std::to_string(p) + " players (cap 20)");
    std::vector<double> values(std::size_t(1) << p);
    for (std::uint32_t mask = 0; mask < values.size(); ++mask)
        values[mask] = value_of_mask(g, mask);
    return TableGame(p, std::move(values));
}

QuadraticGame::QuadraticGame(std::vector<double> lin,
                             std::vector<std::vector<double>> hess,
                             std::vector<double> delta, double v0)
    : lin_(std::move(lin)), hess_(std::move(hess)), delta_(std::move(delta)), v0_(v0) {
    std::size_t n = delta_.size();
    if (n == 0) throw ConfigError("quadratic game needs at least one player");
    if (lin_.size() != n || hess_.size() != n)
        throw ShapeError("quadratic game dimension mismatch");
    for (auto& row : hess_)
        if (row.size() != n) throw ShapeError("quadratic game hessian not square");
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            double s = 0.5 * (hess_[a][b] + hess_[b][a]);
            hess_[a][b] = s;
            hess_[b][a] = s;
        }
}

double QuadraticGame::value(const std::vector<std::uint8_t>& members) const {
    std::size_t n = delta_.size();
    if (members.size() != n) throw ShapeError("membership vector size mismatch");
    double lin_term = 0.0;
    double quad = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        if (!members[a]) continue;
        lin_term += lin_[a] * delta_[a];
        for (std::size_t b = 0; b < n; ++b)
            if (members[b]) quad += delta_[a] * hess_[a][b] * delta_[b];
    }
    return v0_ + lin_term + 0.5 * quad;
}

CoalitionGame::CoalitionGame(const Model& model, Tensor x, Tensor delta,
                             std::vector<std::vector<std::size_t>> cells,
                             std::size_t y)
    : model_(&model), x_(std::move(x)), delta_(std::move(delta)),
      cells_(std::move(cells)), y_(y) {
    model.validate();
    if (x_.numel() != model.input_dim || delta_.numel() != model.input_dim)
        throw ShapeError("input/perturbation size does not match model input");
    if (y_ >= model.num_classes)
        throw LabelError("true label out of range");
    if (model.num_classes < 2)
        throw ConfigError("margin utility needs at least 2 classes");
    if (cells_.empty()) throw ConfigError("partition has no cells");
    std::vector<std::uint8_t> seen(model.input_dim, 0);
    for (const auto& cell : cells_) {
        if (cell.empty()) throw ConfigError("partition contains an empty cell");
        for (std::size_t px : cell) {
            if (px >= model.input_dim)
                throw ConfigError("partition pixel index out of range");
            if (seen[px]) throw ConfigError("partition cells overlap");
            seen[px] = 1;
        }
    }
    for (std::size_t px = 0; px < seen.size(); ++px)
        if (!seen[px])
            throw ConfigError("partition does not cover pixel " + std::to_string(px));
}

double CoalitionGame::value(const std::vector<std::uint8_t>& members) const {
    if (members.size() != cells_.size())
        throw ShapeError("membership vector size mismatch");
    std::vector<double> u = x_.data;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        if (!members[c]) continue;
        for (std::size_t px : cells_[c]) u[px] += delta_.data[px];
    }
    std::vector<double> logits = model_->forward_raw(u);
    return loss_from_logits(logits, y_, LossKind::margin);
}

GridPartition::GridPartition(std::size_t h, std::size_t w, std::size_t s)
    : height(h), width(w), side(s) {
    if (side == 0) throw ConfigError("grid side must be positive");
    if (height == 0 || width == 0) throw ConfigError("grid raster is empty");
    if (side > height || side > width)
        throw ConfigError("grid side " + std::to_string(side) +
                          " exceeds raster " + std::to_string(height) + "x" +
                          std::to_string(width));
}

std::size_t GridPartition::cell_index(std::size_t p, std::size_t q) const {
    if (p >= side || q >= side) throw ConfigError("grid cell coordinate out of range");
    return p * side + q;
}

namespace {

// Split `extent` into `parts` runs whose lengths differ by at most one,
// longer runs first. Returns start offsets (parts+1 entries).
std::vector<std::size_t> split_extent(std::size_t extent, std::size_t parts) {
    std::vector<std::size_t> starts(parts + 1, 0);
    std::size_t base = extent / parts;
    std::size_t extra = extent % parts;
    for (std::size_t p = 0; p < parts; ++p)
        starts[p + 1] = starts[p] + base + (p < extra ? 1 : 0);
    return starts;
}

}  // namespace

std::vector<std::vector<std::size_t>> GridPartition::cells() const {
    std::vector<std::size_t> row_starts = split_extent(height, side);
    std::vector<std::size_t> col_starts = split_extent(width, side);
    std::vector<std::vector<std::size_t>> out(cell_count());
    for (std::size_t p = 0; p < side; ++p)
        for (std::size_t q = 0; q < side; ++q) {
            auto& cell = out[cell_index(p, q)];
            for (std::size_t r = row_starts[p]; r < row_starts[p + 1]; ++r)
                for (std::size_t c = col_starts[q]; c < col_starts[q + 1]; ++c)
                    cell.push_back(r * width + c);
        }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> GridPartition::adjacent_pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t p = 0; p < side; ++p)
        for (std::size_t q = 0; q < side; ++q) {
            if (q + 1 < side) out.push_back({cell_index(p, q), cell_index(p, q + 1)});
            if (p + 1 < side) out.push_back({cell_index(p, q), cell_index(p + 1, q)});
        }
    return out;
}

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::closed_form: return "closed-form";
        case Estimator::sampled: return "sampled";
        case Estimator::brute_force: return "brute-force";
    }
    return "unknown";
}

std::string InteractionReport::to_json() const {
    json j;
    j["mean_interaction"] = mean_interaction;
    j["estimator"] = to_string(estimator);
    j["normalized"] = normalized;
    if (!per_player_terms.empty()) j["per_player_terms"] = per_player_terms;
    if (has_plan) {
        j["plan"] = {{"batches", plan.batches},
                     {"batch_size", plan.batch_size},
                     {"seed", plan.seed}};
    }
    return j.dump();
}

}  // namespace interlab
