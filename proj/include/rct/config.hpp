#pragma once

#include <cstdint>
#include <string>

#include "rct/harness.hpp"

namespace rct {

/// A parsed simulation run: the resolved grid plus run plumbing.
struct RunConfig {
    /// "full", "power_curve" or "custom". Presets are overridden key by key.
    std::string grid_name = "full";
    ScenarioGrid grid = ScenarioGrid::full();
    std::string output_dir = "runs";
    int threads = 0;
};

/// Strict YAML parsing: unknown keys and malformed values raise ParseError
/// with the 1-based line and column of the offending node. An empty
/// document yields the full grid defaults. `grid_override` (when non-empty)
/// replaces the document's `grid` key before presets are applied.
RunConfig parse_run_config(const std::string& text, const std::string& grid_override = {});

/// Fully resolved config as JSON. The result parses back to the same grid.
std::string run_config_json(const RunConfig& config);

/// FNV-1a hash of the resolved grid (threads and output_dir excluded), as
/// 16 hex digits.
std::string grid_hash(const ScenarioGrid& grid);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace rct
