#pragma once

#include "cellsense/estimators.hpp"
#include "cellsense/radio_map.hpp"
#include "cellsense/synth.hpp"

namespace cellsense::bench {

// Rural preset (seed 1) with a 70 m map and the tower registry attached.
struct RuralFixture {
  Dataset data;
  RadioMap map;
};

inline const RuralFixture& rural_fixture() {
  static const RuralFixture f = [] {
    RuralFixture out;
    out.data = generate_dataset(make_preset("rural", 1), 1);
    out.map = build_radio_map(out.data.training, 70.0);
    attach_tower_locations(out.map, out.data.tower_locations);
    return out;
  }();
  return f;
}

}  // namespace cellsense::bench
