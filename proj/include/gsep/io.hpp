#pragma once

// File formats: density fields as long CSV (t,x,u) with a JSON sidecar,
// rate breakdowns and run manifests as JSON, replica profiles as CSV.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gsep/model.hpp"
#include "gsep/pde.hpp"
#include "gsep/rate.hpp"
#include "gsep/sim.hpp"

namespace gsep {

using Json = nlohmann::ordered_json;

// Version string of the build, git-describe style when available.
std::string version_string();

Json to_json(const ModelParams& p);
ModelParams params_from_json(const Json& j);
Json to_json(const Grid& g);
Json to_json(const RateBreakdown& r);
Json field_diagnostics(const DensityField& f);

// One row per (frame, cell). Values are written with round-trip precision.
void write_field_csv(const std::filesystem::path& path, const DensityField& f);
// Reads a field written by write_field_csv; frames must share one uniform
// cell grid on [-1,1].
DensityField read_field_csv(const std::filesystem::path& path);

// Columns t, box_center, mean_density, stderr.
void write_profile_csv(const std::filesystem::path& path, const ReplicaSummary& s, const BoxLayout& layout,
                       int n_sites);

void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

// Stable 64-bit FNV-1a digest of a JSON document's compact dump, as hex.
std::string digest(const Json& j);

// UTC timestamp like 20260101T120000Z.
std::string timestamp_utc();

}  // namespace gsep
