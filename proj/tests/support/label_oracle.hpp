#pragma once

// Two-pass union-find labelling with 8-connectivity; independent of the
// border follower under test.

#include <algorithm>
#include <map>
#include <numeric>
#include <vector>

#include "orbitforge/optical/image.hpp"

namespace oracle {

struct Component {
  int first_x, first_y;  // raster-first pixel
  int min_x, min_y, max_x, max_y;
  std::size_t area;
};

inline std::vector<Component> label_components(const orbitforge::optical::Mask& m) {
  const int w = static_cast<int>(m.width), h = static_cast<int>(m.height);
  std::vector<int> parent;
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  std::vector<int> label(static_cast<std::size_t>(w * h), -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.at(x, y)) continue;
      int mine = -1;
      const int nx[4] = {x - 1, x - 1, x, x + 1}, ny[4] = {y, y - 1, y - 1, y - 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || nx[k] >= w || ny[k] < 0) continue;
        const int l = label[ny[k] * w + nx[k]];
        if (l < 0) continue;
        if (mine < 0) {
          mine = find(l);
        } else {
          const int a = find(mine), b = find(l);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
          mine = std::min(a, b);
        }
      }
      if (mine < 0) {
        mine = static_cast<int>(parent.size());
        parent.push_back(mine);
      }
      label[y * w + x] = mine;
    }
  std::map<int, Component> comps;
  std::vector<int> order;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int l0 = label[y * w + x];
      if (l0 < 0) continue;
      const int l = find(l0);
      auto it = comps.find(l);
      if (it == comps.end()) {
        comps[l] = {x, y, x, y, x, y, 0};
        order.push_back(l);
        it = comps.find(l);
      }
      Component& c = it->second;
      c.min_x = std::min(c.min_x, x);
      c.max_x = std::max(c.max_x, x);
      c.min_y = std::min(c.min_y, y);
      c.max_y = std::max(c.max_y, y);
      ++c.area;
    }
  std::vector<Component> out;
  for (int l : order) out.push_back(comps[l]);
  return out;
}

}  // namespace oracle
