#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "cellsense/gp.hpp"
#include "cellsense/radio_map.hpp"

namespace cellsense {

// Both files share a versioned JSON envelope: {"kind", "version", ...}.
inline constexpr int kRadioMapFormatVersion = 1;
inline constexpr int kGpGridFormatVersion = 1;
inline constexpr const char* kRadioMapKind = "radio_map";
inline constexpr const char* kGpGridKind = "gp_grid";

std::string radio_map_to_json(const RadioMap& map);
RadioMap radio_map_from_json(const std::string& text);

void save_radio_map(const RadioMap& map, const std::filesystem::path& path);
RadioMap load_radio_map(const std::filesystem::path& path);

std::string gp_grid_to_json(const PrecomputedGrid& grid);
PrecomputedGrid gp_grid_from_json(const std::string& text);

void save_gp_grid(const PrecomputedGrid& grid, const std::filesystem::path& path);
PrecomputedGrid load_gp_grid(const std::filesystem::path& path);

}  // namespace cellsense
