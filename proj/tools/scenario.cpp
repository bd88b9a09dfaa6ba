#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "talbot/errors.hpp"
#include "talbot/io.hpp"
#include "talbot/parallel.hpp"
#include "talbot/rng.hpp"
#include "talbot/stats.hpp"

namespace talbot::cli {

namespace {

using nlohmann::json;

double need_number(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing required field '") + key + "'");
    if (!j.at(key).is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

optics::OpticalConfig optics_from_json(const json& j) {
    optics::OpticalConfig c;
    c.wavelength_m = need_number(j, "wavelength_m");
    c.pitch_a_m = j.value("pitch_a_m", 0.0);
    c.mla_pitch_m = j.value("mla_pitch_m", 0.0);
    c.lenslet_focal_f0_m = j.value("lenslet_focal_f0_m", 0.0);
    c.lenslet_diameter_m = j.value("lenslet_diameter_m", 0.0);
    c.illumination_waist_m = j.value("illumination_waist_m", 0.0);
    c.demagnification_M = j.value("demagnification_M", 1.0);
    c.tilt_theta_rad = j.value("tilt_theta_rad", 0.0);
    c.beam_count = j.value("beam_count", 1);
    c.interspace_transmission = j.value("interspace_transmission", 0.0);
    c.validate();
    return c;
}

json optics_to_json(const optics::OpticalConfig& c) {
    return json{{"wavelength_m", c.wavelength_m},
                {"pitch_a_m", c.pitch_a_m},
                {"mla_pitch_m", c.mla_pitch_m},
                {"lenslet_focal_f0_m", c.lenslet_focal_f0_m},
                {"lenslet_diameter_m", c.lenslet_diameter_m},
                {"illumination_waist_m", c.illumination_waist_m},
                {"demagnification_M", c.demagnification_M},
                {"tilt_theta_rad", c.tilt_theta_rad},
                {"beam_count", c.beam_count},
                {"interspace_transmission", c.interspace_transmission}};
}

analysis::PlaneLabel plane_from_json(const json& j) {
    if (j.is_string()) return analysis::PlaneLabel::parse(j.get<std::string>());
    if (j.is_number_integer()) return analysis::PlaneLabel::make(j.get<int>(), 1);
    throw ConfigError("plane labels must be strings like \"1/2\" or integers");
}

std::string plane_file_tag(analysis::PlaneLabel plane) {
    std::string tag = plane.str();
    std::replace(tag.begin(), tag.end(), '/', '_');
    std::replace(tag.begin(), tag.end(), '-', 'm');
    return tag;
}

}  // namespace

Scenario scenario_from_json(const json& j) {
    Scenario s;
    if (!j.contains("optics")) throw ConfigError("scenario needs an 'optics' section");
    s.optics = optics_from_json(j.at("optics"));

    if (j.contains("array")) {
        const auto& a = j.at("array");
        s.array.rows = a.value("rows", s.array.rows);
        s.array.cols = a.value("cols", s.array.cols);
        s.array.trap_waist_w0_m = a.value("trap_waist_w0_m", s.array.trap_waist_w0_m);
        s.array.samples_per_waist = a.value("samples_per_waist", s.array.samples_per_waist);
        s.array.guard_pitches = a.value("guard_pitches", s.array.guard_pitches);
        s.array.model = a.value("model", s.array.model);
        if (s.array.model != "beamlets" && s.array.model != "mask")
            throw ConfigError("array.model must be 'beamlets' or 'mask'");
    }

    if (j.contains("carpet")) {
        const auto& c = j.at("carpet");
        CarpetSection section;
        section.z_min_m = need_number(c, "z_min_m");
        section.z_max_m = need_number(c, "z_max_m");
        section.slices = c.value("slices", 0);
        s.carpet = section;
    }

    if (j.contains("planes"))
        for (const auto& p : j.at("planes")) s.planes.push_back(plane_from_json(p));

    if (j.contains("traps")) s.traps.min_rel_depth = j.at("traps").value("min_rel_depth", 0.1);

    if (j.contains("register")) {
        const auto& r = j.at("register");
        RegisterSection section;
        section.plane = plane_from_json(r.value("plane", json("0")));
        section.rows = r.value("rows", 19);
        section.cols = r.value("cols", 19);
        s.reg = section;
    }

    if (j.contains("interleave")) {
        const auto& i = j.at("interleave");
        registers::InterleaveSpec spec;
        spec.tilt_theta_rad = need_number(i, "tilt_theta_rad");
        spec.lenslet_focal_f0_m = i.value("f0_m", s.optics.lenslet_focal_f0_m);
        spec.plane = plane_from_json(i.value("plane", json("1/2")));
        spec.z_talbot_pre_m = i.value("z_talbot_pre_m",
                                      s.optics.mla_pitch_m > 0.0
                                          ? optics::talbot_length(s.optics.mla_pitch_m, s.optics.wavelength_m)
                                          : 0.0);
        spec.demagnification_M = i.value("demagnification_M", s.optics.demagnification_M);
        spec.frequency_offset_hz = i.value("frequency_offset_hz", 30.0e6);
        if (i.contains("azimuth")) {
            const auto& az = i.at("azimuth");
            spec.azimuth = {az.at(0).get<double>(), az.at(1).get<double>()};
        }
        s.interleave = spec;
    }

    if (j.contains("loading")) {
        const auto& l = j.at("loading");
        s.loading.p_max = l.value("p_max", 0.6);
        s.loading.depth_exponent = l.value("depth_exponent", 0.0);
        s.loading.depth_cutoff = l.value("depth_cutoff", 0.0);
        s.loading.validate();
    }

    if (j.contains("addressing")) {
        const auto& a = j.at("addressing");
        AddressingSection section;
        section.transfer_prob = a.value("transfer_prob", 1.0);
        section.crosstalk_floor = a.value("crosstalk_floor", 0.02);
        s.addressing = section;
    }

    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        s.loss.alpha_pickup = l.value("alpha_pickup", 1.0);
        s.loss.alpha_release = l.value("alpha_release", 1.0);
        s.loss.alpha_per_length_per_m = l.value("alpha_per_length_per_m", 0.0);
        s.loss.cycle_survival = l.value("cycle_survival", 1.0);
        s.loss.validate();
    }

    if (j.contains("assembly")) {
        const auto& a = j.at("assembly");
        AssemblySection section;
        section.target_rows = a.value("target_rows", 9);
        section.target_cols = a.value("target_cols", 9);
        section.max_cycles = a.value("max_cycles", 10);
        if (section.max_cycles < 1) throw ConfigError("assembly.max_cycles must be >= 1");
        s.assembly = section;
    }

    if (j.contains("sweep")) {
        for (const auto& v : j.at("sweep").at("min_sep_m")) s.sweep_min_sep_m.push_back(v.get<double>());
        if (s.sweep_min_sep_m.empty()) throw ConfigError("sweep.min_sep_m must not be empty");
    }

    s.trials = j.value("trials", 1000);
    if (s.trials < 1) throw ConfigError("trials must be >= 1");
    s.master_seed = j.value("master_seed", 1ULL);
    s.output_dir = j.value("output_dir", "out");
    return s;
}

Scenario load_scenario(const std::filesystem::path& config_path) {
    json j;
    try {
        j = json::parse(io::read_text_file(config_path));
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse " + config_path.string() + ": " + e.what());
    }
    return scenario_from_json(j);
}

nlohmann::json scenario_to_json(const Scenario& s) {
    json j;
    j["optics"] = optics_to_json(s.optics);
    j["array"] = {{"rows", s.array.rows},
                  {"cols", s.array.cols},
                  {"trap_waist_w0_m", s.array.trap_waist_w0_m},
                  {"samples_per_waist", s.array.samples_per_waist},
                  {"guard_pitches", s.array.guard_pitches},
                  {"model", s.array.model}};
    if (s.carpet)
        j["carpet"] = {{"z_min_m", s.carpet->z_min_m}, {"z_max_m", s.carpet->z_max_m}, {"slices", s.carpet->slices}};
    if (!s.planes.empty()) {
        json planes = json::array();
        for (const auto& p : s.planes) planes.push_back(p.str());
        j["planes"] = planes;
    }
    j["traps"] = {{"min_rel_depth", s.traps.min_rel_depth}};
    if (s.reg)
        j["register"] = {{"plane", s.reg->plane.str()}, {"rows", s.reg->rows}, {"cols", s.reg->cols}};
    if (s.interleave)
        j["interleave"] = {{"tilt_theta_rad", s.interleave->tilt_theta_rad},
                           {"f0_m", s.interleave->lenslet_focal_f0_m},
                           {"plane", s.interleave->plane.str()},
                           {"z_talbot_pre_m", s.interleave->z_talbot_pre_m},
                           {"demagnification_M", s.interleave->demagnification_M},
                           {"frequency_offset_hz", s.interleave->frequency_offset_hz},
                           {"azimuth", {s.interleave->azimuth.x, s.interleave->azimuth.y}}};
    j["loading"] = {{"p_max", s.loading.p_max},
                    {"depth_exponent", s.loading.depth_exponent},
                    {"depth_cutoff", s.loading.depth_cutoff}};
    if (s.addressing)
        j["addressing"] = {{"transfer_prob", s.addressing->transfer_prob},
                           {"crosstalk_floor", s.addressing->crosstalk_floor}};
    j["loss"] = {{"alpha_pickup", s.loss.alpha_pickup},
                 {"alpha_release", s.loss.alpha_release},
                 {"alpha_per_length_per_m", s.loss.alpha_per_length_per_m},
                 {"cycle_survival", s.loss.cycle_survival}};
    if (s.assembly)
        j["assembly"] = {{"target_rows", s.assembly->target_rows},
                         {"target_cols", s.assembly->target_cols},
                         {"max_cycles", s.assembly->max_cycles}};
    if (!s.sweep_min_sep_m.empty()) j["sweep"] = {{"min_sep_m", s.sweep_min_sep_m}};
    j["trials"] = s.trials;
    j["master_seed"] = s.master_seed;
    j["output_dir"] = s.output_dir;
    return j;
}

namespace {

struct Run {
    Scenario scenario;
    std::filesystem::path out;
    int threads = 1;
    std::vector<std::filesystem::path> artifacts;

    void add_text(const std::string& name, const std::string& content) {
        io::write_text_file(out / name, content);
        artifacts.push_back(name);
    }

    void add_raster(const std::string& base, const optics::ScalarField& field) {
        io::write_raster(field, out / base);
        artifacts.push_back(base + ".f32");
        artifacts.push_back(base + ".json");
    }

    std::vector<std::filesystem::path> finish(const std::string& command) {
        json manifest;
        manifest["command"] = command;
        manifest["scenario"] = scenario_to_json(scenario);
        json list = json::array();
        for (const auto& a : artifacts) {
            const auto path = out / a;
            list.push_back({{"path", a.generic_string()},
                            {"bytes", std::filesystem::file_size(path)},
                            {"fnv1a64", io::hex64(io::fnv1a64_file(path))}});
        }
        manifest["artifacts"] = std::move(list);
        io::write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
        artifacts.push_back("manifest.json");
        std::vector<std::filesystem::path> result;
        result.reserve(artifacts.size());
        for (const auto& a : artifacts) result.push_back(out / a);
        return result;
    }
};

Run start_run(Scenario scenario, const RunOptions& options) {
    if (options.seed_override) scenario.master_seed = *options.seed_override;
    if (options.trials_override) {
        if (*options.trials_override < 1) throw ConfigError("trials must be >= 1");
        scenario.trials = *options.trials_override;
    }
    Run run;
    run.out = options.out_dir.empty() ? std::filesystem::path(scenario.output_dir) : options.out_dir;
    run.threads = std::max(1, options.threads);
    run.scenario = std::move(scenario);
    io::ensure_directory(run.out);
    return run;
}

optics::CarpetOptions carpet_options(const Scenario& s, int threads) {
    optics::CarpetOptions o;
    o.model = s.array.model == "mask" ? optics::CarpetModel::mask_propagation : optics::CarpetModel::beamlets;
    o.array_rows = s.array.rows;
    o.array_cols = s.array.cols;
    o.trap_waist_w0_m = s.array.trap_waist_w0_m;
    o.samples_per_waist = s.array.samples_per_waist;
    o.guard_pitches = s.array.guard_pitches;
    o.threads = threads;
    return o;
}

std::shared_ptr<const registers::Register> build_scenario_register(const Scenario& s) {
    if (!s.reg) throw ConfigError("this command needs a 'register' section");
    return std::make_shared<registers::Register>(
        registers::build_register(s.optics, s.reg->plane, s.reg->rows, s.reg->cols));
}

std::string slice_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "slice_%04zu", index);
    return buf;
}

}  // namespace

std::vector<std::filesystem::path> cmd_carpet(Scenario scenario, const RunOptions& options) {
    if (!scenario.carpet) throw ConfigError("carpet command needs a 'carpet' section");
    const auto& section = *scenario.carpet;
    if (section.slices < 1) throw ConfigError("carpet.slices must be >= 1");
    if (section.z_max_m < section.z_min_m) throw ConfigError("carpet z range is inverted");

    std::vector<double> z_samples;
    z_samples.reserve(static_cast<std::size_t>(section.slices));
    for (int k = 0; k < section.slices; ++k) {
        const double t = section.slices == 1 ? 0.0 : static_cast<double>(k) / (section.slices - 1);
        z_samples.push_back(section.z_min_m + t * (section.z_max_m - section.z_min_m));
    }

    Run run = start_run(std::move(scenario), options);
    const auto opts = carpet_options(run.scenario, run.threads);

    json index = json::array();
    // Chunked evaluation keeps the peak memory at a few slices.
    const std::size_t chunk = std::max<std::size_t>(1, static_cast<std::size_t>(run.threads));
    for (std::size_t begin = 0; begin < z_samples.size(); begin += chunk) {
        const std::size_t end = std::min(z_samples.size(), begin + chunk);
        const std::vector<double> zs(z_samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                     z_samples.begin() + static_cast<std::ptrdiff_t>(end));
        const auto carpet = optics::compute_carpet(run.scenario.optics, zs, opts);
        for (std::size_t k = 0; k < carpet.slices.size(); ++k) {
            const std::string name = slice_name(begin + k);
            run.add_raster(name, carpet.slices[k]);
            index.push_back({{"file", name + ".f32"}, {"z_m", carpet.slices[k].z_m}});
        }
    }
    run.add_text("carpet_index.json", json{{"slices", std::move(index)}}.dump(2) + "\n");
    return run.finish("carpet");
}

std::vector<std::filesystem::path> cmd_traps(Scenario scenario, const RunOptions& options) {
    if (scenario.planes.empty()) throw ConfigError("traps command needs a non-empty 'planes' list");
    Run run = start_run(std::move(scenario), options);
    const Scenario& s = run.scenario;
    const double z_t = optics::talbot_length(s.optics.effective_pitch_m(), s.optics.wavelength_m);
    const auto opts = carpet_options(s, run.threads);

    for (const auto plane : s.planes) {
        const double z = plane.fraction() * z_t;
        const auto carpet = optics::compute_carpet(s.optics, {z}, opts);
        analysis::ExtractOptions extract;
        extract.min_rel_depth = s.traps.min_rel_depth;
        extract.talbot_length_m = z_t;
        auto traps = analysis::extract_traps(carpet.slices[0], extract);
        if (traps.size() >= 4) {
            try {
                const auto fit = analysis::estimate_pitch(traps);
                analysis::assign_site_indices(traps, fit);
            } catch (const FitError&) {
                // Irregular plane: indices stay unassigned.
            }
        }
        run.add_text("traps_T" + plane_file_tag(plane) + ".csv", analysis::traps_to_csv(traps));
    }
    return run.finish("traps");
}

std::vector<std::filesystem::path> cmd_load(Scenario scenario, const RunOptions& options) {
    Run run = start_run(std::move(scenario), options);
    const Scenario& s = run.scenario;
    const auto reg = build_scenario_register(s);

    const auto trials = static_cast<std::size_t>(s.trials);
    std::vector<atoms::AtomState> ensemble(trials);
    parallel_for(trials, run.threads, [&](std::size_t t) {
        ensemble[t] = atoms::load_atoms(reg, s.loading, rng::stream_seed(s.master_seed, t));
    });

    io::CsvWriter trial_log({"trial", "atoms"});
    for (std::size_t t = 0; t < trials; ++t)
        trial_log.add_row({std::to_string(t), std::to_string(ensemble[t].atom_count())});
    run.add_text("trials.csv", trial_log.str());

    const auto stats = atoms::occupancy_stats(ensemble);
    io::CsvWriter summary({"trials", "mean_atoms", "std_atoms"});
    summary.add_row({std::to_string(trials), io::format_double(stats.mean_atoms), io::format_double(stats.std_atoms)});
    run.add_text("summary.csv", summary.str());

    io::CsvWriter freq({"i", "j", "frequency"});
    for (std::size_t k = 0; k < reg->sites.size(); ++k)
        freq.add_row({std::to_string(reg->sites[k].index.i), std::to_string(reg->sites[k].index.j),
                      io::format_double(stats.site_frequency[k])});
    run.add_text("site_frequency.csv", freq.str());
    return run.finish("load");
}

std::vector<std::filesystem::path> cmd_assemble(Scenario scenario, const RunOptions& options) {
    if (!scenario.assembly) throw ConfigError("assemble command needs an 'assembly' section");
    Run run = start_run(std::move(scenario), options);
    const Scenario& s = run.scenario;
    const auto reg = build_scenario_register(s);
    const auto target = assembly::TargetPattern::centered_block(*reg, s.assembly->target_rows,
                                                                s.assembly->target_cols);

    struct TrialResult {
        int initial_atoms = 0;
        int cycles = 0;
        int moves = 0;
        bool success = false;
    };
    const auto trials = static_cast<std::size_t>(s.trials);
    std::vector<TrialResult> results(trials);
    std::vector<std::pair<int, assembly::MoveOp>> first_plan;

    parallel_for(trials, run.threads, [&](std::size_t t) {
        auto state = atoms::load_atoms(reg, s.loading, rng::stream_seed(s.master_seed, 2 * t));
        TrialResult r;
        r.initial_atoms = state.atom_count();
        auto* log = t == 0 ? &first_plan : nullptr;
        const auto outcome = assembly::assemble(std::move(state), target, s.loss, s.assembly->max_cycles,
                                                rng::stream_seed(s.master_seed, 2 * t + 1), log);
        r.cycles = outcome.cycles_used;
        r.moves = outcome.moves_total;
        r.success = outcome.success;
        results[t] = r;
    });

    io::CsvWriter trial_log({"trial", "initial_atoms", "cycles", "moves", "success"});
    std::size_t successes = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto& r = results[t];
        successes += r.success ? 1 : 0;
        trial_log.add_row({std::to_string(t), std::to_string(r.initial_atoms), std::to_string(r.cycles),
                           std::to_string(r.moves), r.success ? "true" : "false"});
    }
    run.add_text("trials.csv", trial_log.str());

    const auto interval = stats::wilson_interval(successes, trials);
    io::CsvWriter summary({"trials", "successes", "success_rate", "wilson_low", "wilson_high"});
    summary.add_row({std::to_string(trials), std::to_string(successes),
                     io::format_double(static_cast<double>(successes) / static_cast<double>(trials)),
                     io::format_double(interval.low), io::format_double(interval.high)});
    run.add_text("summary.csv", summary.str());
    run.add_text("plan_trial0.json", assembly::plan_to_json(first_plan).dump(2) + "\n");
    return run.finish("assemble");
}

namespace {

// Base lattice plus the displaced sublattice, with sublattice indices moved
// past the base block so the union keeps unique (i, j) keys.
struct InterleavedPair {
    std::shared_ptr<const registers::Register> base;
    registers::Register sublattice;
    registers::InterleaveResult result;
    std::shared_ptr<const registers::Register> composite;
    std::vector<char> is_sublattice; // aligned with composite sites
};

InterleavedPair build_interleaved(const Scenario& s) {
    if (!s.interleave) throw ConfigError("this command needs an 'interleave' section");
    RegisterSection section = s.reg.value_or(RegisterSection{s.interleave->plane, 8, 8});
    section.plane = s.interleave->plane;
    auto base = std::make_shared<registers::Register>(
        registers::build_register(s.optics, section.plane, section.rows, section.cols));

    InterleavedPair pair;
    pair.result = registers::interleave(*base, *s.interleave);
    pair.sublattice = pair.result.sublattice;
    pair.base = std::move(base);

    registers::Register composite = *pair.base;
    composite.name = "composite";
    const int shift = section.rows; // index block offset for uniqueness
    for (const auto& site : pair.sublattice.sites)
        composite.sites.push_back({SiteIndex{site.index.i + shift, site.index.j}, site.position_m});
    std::sort(composite.sites.begin(), composite.sites.end(),
              [](const registers::RegisterSite& a, const registers::RegisterSite& b) { return a.index < b.index; });
    pair.composite = std::make_shared<registers::Register>(std::move(composite));
    pair.is_sublattice.resize(pair.composite->sites.size());
    for (std::size_t k = 0; k < pair.composite->sites.size(); ++k)
        pair.is_sublattice[k] = pair.composite->sites[k].index.i >= shift ? 1 : 0;
    return pair;
}

}  // namespace

std::vector<std::filesystem::path> cmd_interleave(Scenario scenario, const RunOptions& options) {
    Run run = start_run(std::move(scenario), options);
    const Scenario& s = run.scenario;
    auto pair = build_interleaved(s);

    run.add_text("register_base.json", registers::register_to_json(*pair.base).dump(2) + "\n");
    run.add_text("register_sublattice.json", registers::register_to_json(pair.sublattice).dump(2) + "\n");

    const double pitch = registers::composite_pitch({*pair.base, pair.sublattice});
    io::CsvWriter geometry(
        {"displacement_x_m", "displacement_y_m", "wrapped", "composite_pitch_m", "violations_at_3um"});
    const auto violations = registers::validate_separation({*pair.base, pair.sublattice}, 3e-6);
    geometry.add_row({io::format_double(pair.result.displacement_m.x),
                      io::format_double(pair.result.displacement_m.y), pair.result.wrapped ? "true" : "false",
                      io::format_double(pitch), std::to_string(violations.size())});
    run.add_text("geometry.csv", geometry.str());

    if (s.addressing) {
        // Spin-transfer statistics on the composite register: the sublattice
        // is addressed, the base lattice sees only crosstalk.
        atoms::AddressingModel model;
        model.transfer_prob = s.addressing->transfer_prob;
        model.crosstalk_floor = s.addressing->crosstalk_floor;

        const auto trials = static_cast<std::size_t>(s.trials);
        struct Counts {
            long init_addr = 0, init_base = 0, after_addr = 0, after_base = 0;
        };
        std::vector<Counts> per_trial(trials);
        parallel_for(trials, run.threads, [&](std::size_t t) {
            auto state = atoms::initialize_spins(
                atoms::load_atoms(pair.composite, s.loading, rng::stream_seed(s.master_seed, 2 * t)),
                atoms::Spin::f2);
            const auto initial = atoms::state_selective_detect(state);
            const auto after_state =
                atoms::address_subregister(state, pair.sublattice, model, rng::stream_seed(s.master_seed, 2 * t + 1));
            const auto after = atoms::state_selective_detect(after_state);
            Counts c;
            for (std::size_t k = 0; k < initial.size(); ++k) {
                if (pair.is_sublattice[k]) {
                    c.init_addr += initial[k];
                    c.after_addr += after[k];
                } else {
                    c.init_base += initial[k];
                    c.after_base += after[k];
                }
            }
            per_trial[t] = c;
        });

        Counts total;
        for (const auto& c : per_trial) {
            total.init_addr += c.init_addr;
            total.init_base += c.init_base;
            total.after_addr += c.after_addr;
            total.after_base += c.after_base;
        }
        const auto sub_sites = static_cast<double>(pair.sublattice.sites.size()) * static_cast<double>(trials);
        const auto base_sites = static_cast<double>(pair.base->sites.size()) * static_cast<double>(trials);
        io::CsvWriter addressing({"site_class", "initial_occupancy", "detected_occupancy", "retention"});
        addressing.add_row({"addressed", io::format_double(total.init_addr / sub_sites),
                            io::format_double(total.after_addr / sub_sites),
                            io::format_double(total.init_addr ? static_cast<double>(total.after_addr) / total.init_addr
                                                              : 0.0)});
        addressing.add_row({"unaddressed", io::format_double(total.init_base / base_sites),
                            io::format_double(total.after_base / base_sites),
                            io::format_double(total.init_base ? static_cast<double>(total.after_base) / total.init_base
                                                              : 0.0)});
        run.add_text("addressing_stats.csv", addressing.str());
    }
    return run.finish("interleave");
}

std::vector<std::filesystem::path> cmd_sweep(Scenario scenario, const RunOptions& options) {
    if (scenario.sweep_min_sep_m.empty()) throw ConfigError("sweep command needs a 'sweep' section");
    Run run = start_run(std::move(scenario), options);
    const Scenario& s = run.scenario;
    auto pair = build_interleaved(s);

    io::CsvWriter sweep({"min_sep_m", "violations"});
    for (const double min_sep : s.sweep_min_sep_m) {
        const auto violations = registers::validate_separation({*pair.base, pair.sublattice}, min_sep);
        sweep.add_row({io::format_double(min_sep), std::to_string(violations.size())});
    }
    run.add_text("sweep.csv", sweep.str());
    return run.finish("sweep");
}

int run_command(const std::string& command, const std::filesystem::path& config_path, const RunOptions& options) {
    try {
        const Scenario scenario = load_scenario(config_path);
        if (command == "carpet")
            cmd_carpet(scenario, options);
        else if (command == "traps")
            cmd_traps(scenario, options);
        else if (command == "load")
            cmd_load(scenario, options);
        else if (command == "assemble")
            cmd_assemble(scenario, options);
        else if (command == "interleave")
            cmd_interleave(scenario, options);
        else if (command == "sweep")
            cmd_sweep(scenario, options);
        else
            throw ConfigError("unknown command '" + command + "'");
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace talbot::cli
