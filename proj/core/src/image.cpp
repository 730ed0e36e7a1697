// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "evd/image.hpp"

namespace evd {

void RgbImage::clamp() {
  for (auto& v : data) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace evd
