// Copyright 2026 The fimesh Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "fimesh/equirect.hpp"

namespace fimesh {

// Deterministic synthetic 360-degree frames for tests and desk-scale
// training runs.
//  * Natural: band-limited sum of spherical sinusoids, per-frame normalized
//    to [0.05, 0.95]; the default corpus generator.
//  * Checker: latitude/longitude checkerboard, hard {0,1} edges.
//  * Gradient: vertical latitude ramp, seam-free.
enum class SynthPattern : std::uint8_t { Natural = 0, Checker = 1, Gradient = 2 };

SynthPattern synth_pattern_from_name(const std::string& name);

EquirectImage synth_frame(SynthPattern pattern, int width, int channels,
                          std::uint64_t seed);

}  // namespace fimesh
