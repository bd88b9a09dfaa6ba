#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "talbot/analysis.hpp"
#include "talbot/assembly.hpp"
#include "talbot/atoms.hpp"
#include "talbot/optics.hpp"
#include "talbot/registers.hpp"

namespace talbot::cli {

struct ArraySection {
    int rows = 16;
    int cols = 16;
    double trap_waist_w0_m = 1.45e-6;
    double samples_per_waist = 16.0;
    double guard_pitches = 8.0;
    std::string model = "beamlets"; // or "mask"
};

struct CarpetSection {
    double z_min_m = 0.0;
    double z_max_m = 0.0;
    int slices = 0;
};

struct RegisterSection {
    analysis::PlaneLabel plane;
    int rows = 19;
    int cols = 19;
};

struct AddressingSection {
    double transfer_prob = 1.0;
    double crosstalk_floor = 0.02;
};

struct AssemblySection {
    int target_rows = 9;
    int target_cols = 9;
    int max_cycles = 10;
};

struct TrapsSection {
    double min_rel_depth = 0.1;
};

// One reproducible run: every command reads the sections it needs and
// errors on missing ones. All lengths are meters, angles radians,
// frequencies hertz, as spelled by the field suffixes.
struct Scenario {
    optics::OpticalConfig optics;
    ArraySection array;
    std::optional<CarpetSection> carpet;
    std::vector<analysis::PlaneLabel> planes;
    TrapsSection traps;
    std::optional<RegisterSection> reg;
    std::optional<registers::InterleaveSpec> interleave;
    atoms::LoadingModel loading;
    std::optional<AddressingSection> addressing;
    assembly::LossModel loss;
    std::optional<AssemblySection> assembly;
    std::vector<double> sweep_min_sep_m;
    int trials = 1000;
    std::uint64_t master_seed = 1;
    std::string output_dir = "out";
};

Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& config_path);

// Fully resolved echo (defaults expanded) for the run manifest.
nlohmann::json scenario_to_json(const Scenario& scenario);

struct RunOptions {
    std::filesystem::path out_dir; // empty = scenario.output_dir
    int threads = 1;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> trials_override;
};

// Each command writes its artifacts plus a manifest.json echoing the
// resolved scenario and the artifact checksums. Returns the artifact list
// (manifest last).
std::vector<std::filesystem::path> cmd_carpet(Scenario scenario, const RunOptions& options);
std::vector<std::filesystem::path> cmd_traps(Scenario scenario, const RunOptions& options);
std::vector<std::filesystem::path> cmd_load(Scenario scenario, const RunOptions& options);
std::vector<std::filesystem::path> cmd_assemble(Scenario scenario, const RunOptions& options);
std::vector<std::filesystem::path> cmd_interleave(Scenario scenario, const RunOptions& options);
std::vector<std::filesystem::path> cmd_sweep(Scenario scenario, const RunOptions& options);

// Dispatch by name; returns the process exit code (0 ok, 2 config,
// 3 numerical, 4 I/O).
int run_command(const std::string& command, const std::filesystem::path& config_path, const RunOptions& options);

}  // namespace talbot::cli
