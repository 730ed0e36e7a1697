// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "evd/image.hpp"
#include "evd/mosaic.hpp"
#include "evd/train.hpp"

namespace evd::synthetic {

/// Low-frequency sinusoidal color field in [0.1, 0.9]. Demosaics well with
/// classical interpolation.
RgbImage smooth_gradient(std::size_t width, std::size_t height, std::uint64_t seed);

/// Smooth background with hard-edged rectangles and discs of random color.
RgbImage edge_scene(std::size_t width, std::size_t height, std::uint64_t seed);

/// `count` ground-truth images alternating edge and smooth scenes, each
/// mosaicked through `pattern`. Ids are "synth_000", "synth_001", ...
train::Dataset make_dataset(std::size_t count, std::size_t width, std::size_t height, std::uint64_t seed,
                            const CfaPattern& pattern);

}  // namespace evd::synthetic
