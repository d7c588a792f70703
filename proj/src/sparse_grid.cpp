#include "aulmpm/sparse_grid.hpp"

namespace aulmpm {

namespace {

constexpr int kKeyBits = 21;
constexpr std::int64_t kKeyBias = std::int64_t{1} << (kKeyBits - 1);

inline int floor_div(int a, int b)
{
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

} // namespace

template <int Dim>
std::uint64_t SparseGrid<Dim>::tile_key(const NodeIndex<Dim>& tile) const
{
    std::uint64_t key = 0;
    for (int d = 0; d < Dim; ++d)
        key = (key << kKeyBits) | static_cast<std::uint64_t>(tile[d] + kKeyBias);
    return key;
}

template <int Dim>
std::int64_t SparseGrid<Dim>::find(const NodeIndex<Dim>& node) const
{
    NodeIndex<Dim> tile;
    int local = 0;
    for (int d = 0; d < Dim; ++d) {
        tile[d] = floor_div(node[d], kTileWidth);
        local = local * kTileWidth + (node[d] - tile[d] * kTileWidth);
    }
    auto it = tiles_.find(tile_key(tile));
    if (it == tiles_.end())
        return -1;
    const std::int64_t slot = static_cast<std::int64_t>(it->second) * kTileSize + local;
    return nodes_[static_cast<std::size_t>(slot)].active ? slot : -1;
}

template <int Dim>
std::int64_t SparseGrid<Dim>::activate(const NodeIndex<Dim>& node)
{
    NodeIndex<Dim> tile;
    int local = 0;
    for (int d = 0; d < Dim; ++d) {
        tile[d] = floor_div(node[d], kTileWidth);
        local = local * kTileWidth + (node[d] - tile[d] * kTileWidth);
    }
    auto [it, inserted] = tiles_.try_emplace(tile_key(tile), static_cast<std::int32_t>(tiles_.size()));
    if (inserted)
        nodes_.resize(nodes_.size() + kTileSize);
    const std::int64_t slot = static_cast<std::int64_t>(it->second) * kTileSize + local;
    auto& n = nodes_[static_cast<std::size_t>(slot)];
    if (!n.active) {
        n = GridNode<Dim>{};
        n.active = true;
        n.reference = spec_.node_position(node);
        active_.push_back(slot);
    }
    return slot;
}

template <int Dim>
const GridNode<Dim>& SparseGrid<Dim>::node(const NodeIndex<Dim>& node) const
{
    const std::int64_t slot = find(node);
    return slot < 0 ? empty_ : nodes_[static_cast<std::size_t>(slot)];
}

template <int Dim>
void SparseGrid<Dim>::clear_payload()
{
    for (auto slot : active_)
        nodes_[static_cast<std::size_t>(slot)].clear_payload();
}

template <int Dim>
void SparseGrid<Dim>::reset()
{
    tiles_.clear();
    nodes_.clear();
    active_.clear();
}

template class SparseGrid<2>;
template class SparseGrid<3>;

} // namespace aulmpm
