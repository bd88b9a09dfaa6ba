#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "scenario.hpp"
#include "talbot/errors.hpp"
#include "talbot/io.hpp"

using namespace talbot;
using namespace talbot::cli;
using doctest::Approx;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("talbot_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

nlohmann::json base_scenario() {
    return nlohmann::json{
        {"optics",
         {{"wavelength_m", 796.3e-9},
          {"pitch_a_m", 10.3e-6},
          {"mla_pitch_m", 110e-6},
          {"lenslet_focal_f0_m", 1.66e-3},
          {"demagnification_M", 10.3 / 110.0}}},
        {"array",
         {{"rows", 6}, {"cols", 6}, {"trap_waist_w0_m", 1.45e-6}, {"samples_per_waist", 8}, {"guard_pitches", 2}}},
        {"planes", {"0"}},
        {"traps", {{"min_rel_depth", 0.1}}},
        {"register", {{"plane", "0"}, {"rows", 19}, {"cols", 19}}},
        {"loading", {{"p_max", 0.529}, {"depth_exponent", 0}}},
        {"assembly", {{"target_rows", 9}, {"target_cols", 9}, {"max_cycles", 10}}},
        {"trials", 500},
        {"master_seed", 20240811},
        {"output_dir", "out"}};
}

std::vector<std::string> csv_lines(const fs::path& p) {
    std::vector<std::string> lines;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

RunOptions options_for(const fs::path& out, int threads = 2) {
    RunOptions o;
    o.out_dir = out;
    o.threads = threads;
    return o;
}

}  // namespace

TEST_CASE("scenario JSON round trip resolves defaults") {
    const auto s = scenario_from_json(base_scenario());
    CHECK(s.optics.pitch_a_m == Approx(10.3e-6));
    CHECK(s.reg.has_value());
    CHECK(s.loading.p_max == Approx(0.529));
    const auto echoed = scenario_to_json(s);
    CHECK(echoed.at("loss").at("alpha_pickup").get<double>() == 1.0);
    CHECK(echoed.at("traps").at("min_rel_depth").get<double>() == Approx(0.1));
    // The echo parses back to the same resolved scenario.
    const auto again = scenario_from_json(echoed);
    CHECK(scenario_to_json(again) == echoed);

    CHECK_THROWS_AS(scenario_from_json(nlohmann::json{{"trials", 3}}), ConfigError);
    auto bad = base_scenario();
    bad["loading"]["p_max"] = 1.5;
    CHECK_THROWS_AS(scenario_from_json(bad), ConfigError);
}

TEST_CASE("carpet command writes the slice rasters and index") {
    TempDir dir("carpet");
    auto j = base_scenario();
    j["carpet"] = {{"z_min_m", -30e-6}, {"z_max_m", 30e-6}, {"slices", 5}};
    const auto scenario = scenario_from_json(j);

    const auto artifacts = cmd_carpet(scenario, options_for(dir.path));
    CHECK(artifacts.size() == 5 * 2 + 2); // rasters + sidecars + index + manifest

    const auto index = nlohmann::json::parse(io::read_text_file(dir.path / "carpet_index.json"));
    REQUIRE(index.at("slices").size() == 5);
    CHECK(index.at("slices")[0].at("z_m").get<double>() == Approx(-30e-6));
    CHECK(index.at("slices")[4].at("z_m").get<double>() == Approx(30e-6));

    const auto [meta, pixels] = io::read_raster(dir.path / "slice_0002");
    CHECK(meta.z_m == Approx(0.0));
    CHECK(meta.nx * meta.ny == static_cast<int>(pixels.size()));
    double peak = 0.0;
    for (const float v : pixels) peak = std::max(peak, static_cast<double>(v));
    CHECK(peak > 0.0);

    SUBCASE("an empty z list is rejected before any file is written") {
        TempDir empty("carpet_empty");
        auto bad = j;
        bad["carpet"]["slices"] = 0;
        CHECK_THROWS_AS(cmd_carpet(scenario_from_json(bad), options_for(empty.path / "sub")), ConfigError);
        CHECK(!fs::exists(empty.path / "sub"));
    }
}

TEST_CASE("trap tables carry the configured lattice") {
    TempDir dir("traps");
    const auto scenario = scenario_from_json(base_scenario());
    cmd_traps(scenario, options_for(dir.path));

    const auto lines = csv_lines(dir.path / "traps_T0.csv");
    REQUIRE(lines.size() > 10);
    CHECK(lines[0] == "x_m,y_m,z_m,waist_m,rel_depth,plane,i,j");

    // Column order: x, y, z, waist, rel_depth, plane, i, j.
    std::vector<double> xs, waists;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto cells = split(lines[k]);
        REQUIRE(cells.size() == 8);
        xs.push_back(std::stod(cells[0]));
        waists.push_back(std::stod(cells[3]));
        CHECK(cells[5] == "0");
    }
    std::sort(xs.begin(), xs.end());
    std::vector<double> gaps;
    for (std::size_t k = 1; k < xs.size(); ++k)
        if (xs[k] - xs[k - 1] > 1e-6) gaps.push_back(xs[k] - xs[k - 1]);
    REQUIRE(!gaps.empty());
    for (const double g : gaps) CHECK(g == Approx(10.3e-6).epsilon(0.01));
    for (const double w : waists) CHECK(w == Approx(1.45e-6).epsilon(0.05));

    SUBCASE("a threshold above every trap yields an empty table") {
        TempDir high("traps_high");
        auto j = base_scenario();
        j["traps"]["min_rel_depth"] = 1.01;
        cmd_traps(scenario_from_json(j), options_for(high.path));
        const auto empty_lines = csv_lines(high.path / "traps_T0.csv");
        CHECK(empty_lines.size() == 1); // header only
    }
}

TEST_CASE("loading statistics land on the binomial values") {
    TempDir dir("load");
    auto j = base_scenario();
    j["trials"] = 2000;
    cmd_load(scenario_from_json(j), options_for(dir.path));

    const auto summary = csv_lines(dir.path / "summary.csv");
    REQUIRE(summary.size() == 2);
    const auto cells = split(summary[1]);
    CHECK(std::stod(cells[1]) == Approx(361 * 0.529).epsilon(0.005));
    CHECK(std::stod(cells[2]) == Approx(9.484).epsilon(0.1));

    const auto freq = csv_lines(dir.path / "site_frequency.csv");
    CHECK(freq.size() == 362);
}

TEST_CASE("lossless assembly succeeds whenever enough atoms load") {
    TempDir dir("assemble");
    auto j = base_scenario();
    j["trials"] = 300;
    cmd_assemble(scenario_from_json(j), options_for(dir.path));

    const auto lines = csv_lines(dir.path / "trials.csv");
    REQUIRE(lines.size() == 301);
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto cells = split(lines[k]);
        const int initial = std::stoi(cells[1]);
        const bool success = cells[4] == "true";
        CHECK(success == (initial >= 81));
    }
}

TEST_CASE("sweep reports violations monotonically in the threshold") {
    TempDir dir("sweep");
    auto j = base_scenario();
    // Tilt chosen to displace the sublattice by 5 um along the columns.
    j["interleave"] = {{"tilt_theta_rad", 1e-3}, {"f0_m", 53.40990990990991e-3},
                       {"plane", "1/2"},         {"z_talbot_pre_m", 0.0},
                       {"azimuth", {0.0, 1.0}},  {"frequency_offset_hz", 30e6}};
    j["register"] = {{"plane", "1/2"}, {"rows", 6}, {"cols", 6}};
    j["sweep"] = {{"min_sep_m", {2e-6, 3e-6, 6e-6}}};
    cmd_sweep(scenario_from_json(j), options_for(dir.path));

    const auto lines = csv_lines(dir.path / "sweep.csv");
    REQUIRE(lines.size() == 4);
    CHECK(split(lines[1])[1] == "0");
    CHECK(split(lines[2])[1] == "0");
    CHECK(std::stoi(split(lines[3])[1]) > 0);
}

TEST_CASE("interleave geometry and addressing statistics") {
    TempDir dir("interleave");
    auto j = base_scenario();
    const double pitch = 10.3e-6;
    // Half-pitch diagonal offset: f0 sized so M * theta * f0 = a / sqrt(2).
    const double theta = 12.3e-3;
    const double m = 10.3 / 110.0;
    j["interleave"] = {{"tilt_theta_rad", theta},
                       {"f0_m", pitch / std::numbers::sqrt2 / (m * theta)},
                       {"plane", "1/2"},
                       {"z_talbot_pre_m", 0.0},
                       {"frequency_offset_hz", 30e6}};
    j["register"] = {{"plane", "1/2"}, {"rows", 8}, {"cols", 8}};
    j["addressing"] = {{"transfer_prob", 1.0 - 0.01 / 0.47}, {"crosstalk_floor", 0.02}};
    j["loading"] = {{"p_max", 0.47}, {"depth_exponent", 0}};
    j["trials"] = 2000;
    cmd_interleave(scenario_from_json(j), options_for(dir.path));

    const auto geometry = csv_lines(dir.path / "geometry.csv");
    REQUIRE(geometry.size() == 2);
    const auto cells = split(geometry[1]);
    CHECK(std::stod(cells[0]) == Approx(0.5 * pitch).epsilon(1e-6));
    CHECK(std::stod(cells[3]) == Approx(pitch / std::numbers::sqrt2).epsilon(1e-6));

    const auto addressing = csv_lines(dir.path / "addressing_stats.csv");
    REQUIRE(addressing.size() == 3);
    const auto addressed = split(addressing[1]);
    const auto unaddressed = split(addressing[2]);
    CHECK(std::stod(addressed[1]) == Approx(0.47).epsilon(0.05));
    CHECK(std::stod(addressed[2]) == Approx(0.01).epsilon(0.5));
    CHECK(std::stod(unaddressed[3]) == Approx(0.98).epsilon(0.01));
}

TEST_CASE("identical seeds give byte-identical outputs, threads do not matter") {
    TempDir a("repro_a"), b("repro_b"), c("repro_c"), d("repro_d");
    auto j = base_scenario();
    j["trials"] = 400;
    const auto scenario = scenario_from_json(j);

    cmd_load(scenario, options_for(a.path, 1));
    cmd_load(scenario, options_for(b.path, 1));
    cmd_load(scenario, options_for(c.path, 4));
    for (const char* name : {"trials.csv", "summary.csv", "site_frequency.csv", "manifest.json"}) {
        CHECK(io::read_text_file(a.path / name) == io::read_text_file(b.path / name));
        CHECK(io::read_text_file(a.path / name) == io::read_text_file(c.path / name));
    }

    RunOptions other = options_for(d.path, 2);
    other.seed_override = 999;
    cmd_load(scenario, other);
    CHECK(io::read_text_file(a.path / "trials.csv") != io::read_text_file(d.path / "trials.csv"));

    SUBCASE("assembly runs reproduce as well") {
        TempDir e("repro_e"), f("repro_f");
        auto ja = base_scenario();
        ja["trials"] = 150;
        ja["loss"] = {{"alpha_pickup", 0.95}, {"cycle_survival", 0.995}};
        const auto sc = scenario_from_json(ja);
        cmd_assemble(sc, options_for(e.path, 1));
        cmd_assemble(sc, options_for(f.path, 4));
        CHECK(io::read_text_file(e.path / "trials.csv") == io::read_text_file(f.path / "trials.csv"));
        CHECK(io::read_text_file(e.path / "manifest.json") == io::read_text_file(f.path / "manifest.json"));
    }
}

TEST_CASE("run_command maps failures to exit codes") {
    TempDir dir("codes");
    const auto config = dir.path / "scenario.json";

    io::write_text_file(config, "{ not json");
    CHECK(run_command("load", config, options_for(dir.path / "o1")) == 2);

    io::write_text_file(config, base_scenario().dump(2));
    CHECK(run_command("nonsense", config, options_for(dir.path / "o2")) == 2);
    CHECK(run_command("sweep", config, options_for(dir.path / "o3")) == 2); // missing section

    auto j = base_scenario();
    j["array"]["samples_per_waist"] = 4; // under the sampling floor
    j["carpet"] = {{"z_min_m", 0.0}, {"z_max_m", 1e-6}, {"slices", 2}};
    io::write_text_file(config, j.dump(2));
    CHECK(run_command("carpet", config, options_for(dir.path / "o4")) == 3);

    CHECK(run_command("load", dir.path / "missing.json", options_for(dir.path / "o5")) == 4);

    io::write_text_file(config, base_scenario().dump(2));
    CHECK(run_command("load", config, options_for(dir.path / "o6", 2)) == 0);
}
