#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "aulmpm/mls_ops.hpp"

namespace aulmpm {

template <int Dim>
struct GridNode {
    double mass = 0.0;
    Vec<Dim> velocity = Vec<Dim>::Zero();     // momentum during P2G, velocity afterwards
    Vec<Dim> velocity_old = Vec<Dim>::Zero(); // velocity before the momentum update
    Vec<Dim> force = Vec<Dim>::Zero();
    Vec<Dim> position = Vec<Dim>::Zero();  // rasterized current position q_i
    double weight_sum = 0.0;               // sum of W over contributing particles
    Vec<Dim> reference = Vec<Dim>::Zero(); // q_i^s
    bool active = false;
    bool collided = false;

    void clear_payload()
    {
        mass = 0.0;
        velocity.setZero();
        velocity_old.setZero();
        force.setZero();
        position.setZero();
        weight_sum = 0.0;
        collided = false;
    }
};

// Tiled sparse lattice. Tiles of kTileWidth^Dim nodes are allocated on first
// touch; node storage slots are stable until reset().
template <int Dim>
class SparseGrid {
public:
    static constexpr int kTileWidth = 4;
    static constexpr int kTileSize = Dim == 2 ? 16 : 64;

    SparseGrid() = default;
    explicit SparseGrid(const GridSpec<Dim>& spec) : spec_(spec) {}

    const GridSpec<Dim>& spec() const { return spec_; }

    // Idempotent. Returns the storage slot of the node.
    std::int64_t activate(const NodeIndex<Dim>& node);

    // Slot of an active node, -1 otherwise.
    std::int64_t find(const NodeIndex<Dim>& node) const;

    // Inactive lookups return a zero-mass node.
    const GridNode<Dim>& node(const NodeIndex<Dim>& node) const;

    GridNode<Dim>& at(std::int64_t slot) { return nodes_[static_cast<std::size_t>(slot)]; }
    const GridNode<Dim>& at(std::int64_t slot) const { return nodes_[static_cast<std::size_t>(slot)]; }

    std::size_t slot_count() const { return nodes_.size(); }
    std::size_t tile_count() const { return tiles_.size(); }

    // Active slots in activation order.
    const std::vector<std::int64_t>& active_slots() const { return active_; }

    void clear_payload();
    void reset();

    double mass_epsilon = 0.0;
    std::uint64_t bound_epoch = 0;

private:
    std::uint64_t tile_key(const NodeIndex<Dim>& tile) const;

    GridSpec<Dim> spec_;
    std::unordered_map<std::uint64_t, std::int32_t> tiles_;
    std::vector<GridNode<Dim>> nodes_;
    std::vector<std::int64_t> active_;
    GridNode<Dim> empty_;
};

} // namespace aulmpm
