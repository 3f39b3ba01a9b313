#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amdnet/io.hpp"
#include "amdnet/motion_grid.hpp"

namespace amdnet {

// Command entry points shared by the binary and in-process callers. Each
// reads its whole config first, rejects unknown keys, validates, and only
// then touches the filesystem. All throw on failure.

// Writes seeded scene directories plus a train/val index under out.
void cmd_gen(const KeyValues& cfg);

// Trains on the index's train split; writes checkpoint.ckpt and loss.csv.
void cmd_train(const KeyValues& cfg);

// Scores a checkpoint on the chosen split; writes eval.csv with per-scene
// rows and per-method aggregates in both ROI modes.
void cmd_eval(const KeyValues& cfg);

// Runs one window through a checkpoint; writes the masked prediction grid
// and clustered boxes.
void cmd_infer(const KeyValues& cfg);

// Renders a motion grid (or a fresh prediction) as a portable pixmap.
void cmd_render(const KeyValues& cfg);

// Times forward passes; writes bench.csv.
void cmd_bench(const KeyValues& cfg);

// HSV velocity rendering: hue from atan2(vy, vx), saturation from the speed
// against v_max, value 1 on known/occupied cells. Row 0 of the image is the
// grid's top (largest y), so +y points up.
std::vector<uint8_t> render_motion_grid(const MotionGrid& grid, double v_max);

void write_ppm(const std::string& path, int width, int height,
               const std::vector<uint8_t>& rgb);

}  // namespace amdnet
