#pragma once

#include <filesystem>
#include <fstream>
#include <span>

#include "aulmpm/simulation.hpp"

namespace aulmpm {

// id,x,y[,z],vx,vy[,vz],J_total,epoch. Strict mode prints 17 significant digits.
template <int Dim>
void write_frame(const std::filesystem::path& path, const Simulation<Dim>& sim, bool strict);

template <int Dim>
class StatsWriter {
public:
    StatsWriter(const std::filesystem::path& path, bool strict);
    void append(const FrameStats<Dim>& stats);

private:
    std::filesystem::path path_;
    std::ofstream out_;
    int digits_;
};

struct RunSummary {
    std::uint64_t steps = 0;
    std::uint64_t updates = 0;
    double time = 0.0;
};

// Writes frame_00000.csv (initial state) and one snapshot per frame interval,
// plus stats.csv with one row per step.
template <int Dim>
RunSummary run(Simulation<Dim>& sim, int frames, const std::filesystem::path& out_dir);

std::filesystem::path frame_path(const std::filesystem::path& out_dir, int frame);

} // namespace aulmpm
