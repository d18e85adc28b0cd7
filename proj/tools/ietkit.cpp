#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ietkit/calibration.hpp"
#include "ietkit/core.hpp"
#include "ietkit/detector.hpp"
#include "ietkit/io.hpp"
#include "ietkit/probe.hpp"
#include "ietkit/scenario.hpp"
#include "ietkit/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<fs::path> csv_files_in(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw iet::Error(iet::ErrorCode::InvalidArgument,
                         dir.string() + " is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw iet::Error(iet::ErrorCode::InvalidArgument,
                         "no .csv arrays in " + dir.string());
    }
    return files;
}

iet::TraceBatch load_batch(const fs::path& dir) {
    iet::TraceBatch batch;
    batch.condition_label = dir.filename().string();
    int max_day = 1;
    int max_repeat = 0;
    for (const fs::path& file : csv_files_in(dir)) {
        iet::IetArray array = iet::read_array_csv(file);
        if (array.day_index) {
            max_day = std::max(max_day, *array.day_index);
        }
        if (array.repeat_index) {
            max_repeat = std::max(max_repeat, *array.repeat_index);
        }
        batch.arrays.push_back(std::move(array));
    }
    batch.protocol.days = max_day;
    batch.protocol.repeats_per_day =
        max_repeat > 0 ? max_repeat
                       : static_cast<int>(batch.arrays.size());
    batch.protocol.delay_seconds = 0.0;
    batch.validate();
    return batch;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx",
                  static_cast<unsigned long long>(v));
    return buf;
}

int run_simulate(const std::string& scenario_file, int days, int repeats,
                 std::uint64_t seed, const std::string& out_dir,
                 std::string label) {
    const iet::ScenarioSpec spec = iet::read_scenario(scenario_file);
    if (label.empty()) {
        label = fs::path(scenario_file).stem().string();
    }
    constexpr double kDelaySeconds = 2.0;
    const iet::TraceBatch batch =
        iet::simulate_batch(spec, days, repeats, seed, label, kDelaySeconds);

    fs::create_directories(out_dir);
    json manifest;
    manifest["scenario_file"] = scenario_file;
    manifest["scenario_fingerprint"] = hex64(iet::scenario_fingerprint(spec));
    manifest["base_seed"] = seed;
    manifest["days"] = days;
    manifest["repeats_per_day"] = repeats;
    manifest["delay_seconds"] = kDelaySeconds;
    manifest["label"] = label;
    manifest["arrays"] = json::array();

    for (const iet::IetArray& array : batch.arrays) {
        const int day = array.day_index.value_or(1);
        const int rep = array.repeat_index.value_or(1);
        const std::string name = label + "_d" + std::to_string(day) + "_r" +
                                 std::to_string(rep) + ".csv";
        iet::write_array_csv(fs::path(out_dir) / name, array);
        manifest["arrays"].push_back(
            {{"file", name},
             {"day", day},
             {"repeat", rep},
             {"seed", iet::derive_seed(seed, static_cast<std::uint32_t>(day),
                                       static_cast<std::uint32_t>(rep))}});
    }
    std::ofstream mout(fs::path(out_dir) / "manifest.json");
    mout << manifest.dump(2) << "\n";
    if (!mout) {
        throw iet::Error(iet::ErrorCode::InvalidArgument,
                         "failed writing manifest in " + out_dir);
    }
    std::cout << "wrote " << batch.arrays.size() << " arrays to " << out_dir
              << "\n";
    return 0;
}

void print_table_summary(const iet::ThresholdTable& table) {
    std::cout << "chosen filtration level: " << table.chosen_filtration_level
              << "\n";
    for (const iet::ThresholdEntry& e : table.entries) {
        std::cout << "  " << iet::statistic_kind_name(e.statistic) << " @ "
                  << e.filtration_level << ": no-hv <= " << e.no_hv_upper;
        if (e.hv_lower) {
            std::cout << ", hv >= " << *e.hv_lower;
        }
        std::cout << " (type1 " << e.type1_error << ", type2 " << e.type2_error
                  << ")\n";
    }
    for (const iet::NestedBand& b : table.nested_bands) {
        std::cout << "  band " << b.hypervisor_count << ": ";
        if (b.lower) {
            std::cout << *b.lower << " <= ";
        }
        std::cout << "layers";
        if (b.upper) {
            std::cout << " <= " << *b.upper;
        }
        std::cout << " (type1 " << b.type1_error << ", type2 " << b.type2_error
                  << ")\n";
    }
}

int run_calibrate(const std::string& no_hv_dir, const std::string& hv_dir,
                  const std::vector<std::string>& nested_dirs,
                  const std::string& out_file) {
    const iet::TraceBatch no_hv = load_batch(no_hv_dir);
    const iet::TraceBatch hv = load_batch(hv_dir);
    iet::ThresholdTable table = iet::build_threshold_table(no_hv, hv);

    if (!nested_dirs.empty()) {
        std::vector<iet::TraceBatch> chain;
        chain.push_back(no_hv);
        chain.push_back(hv);
        for (const std::string& dir : nested_dirs) {
            chain.push_back(load_batch(dir));
        }
        const iet::NestedCalibration nested = iet::calibrate_nested(chain);
        table.nested_bands = nested.bands;
        // Banded counts are read against this level at detection time.
        table.chosen_filtration_level = nested.filtration_level;
    }

    iet::write_threshold_table(out_file, table);
    print_table_summary(table);
    std::cout << "wrote " << out_file << "\n";
    return 0;
}

json verdict_report(const iet::DetectionVerdict& verdict) {
    json report;
    report["verdict"] = iet::verdict_kind_name(verdict.kind);
    report["exit_code"] = iet::verdict_exit_code(verdict.kind);
    report["arrays_examined"] = verdict.arrays_examined;
    report["hypervisor_count"] = verdict.hypervisor_count
                                     ? json(*verdict.hypervisor_count)
                                     : json(nullptr);
    report["evidence"] = json::array();
    for (const iet::EvidenceItem& item : verdict.evidence) {
        report["evidence"].push_back(
            {{"statistic", iet::statistic_kind_name(item.statistic)},
             {"filtration_level", item.filtration_level},
             {"value", item.value},
             {"classification", iet::classification_name(item.classification)},
             {"matched_bound", item.matched_bound ? json(*item.matched_bound)
                                                  : json(nullptr)}});
    }
    return report;
}

int run_detect(const std::string& table_file, const std::string& from_dir,
               const std::string& scenario_file, bool use_probe,
               std::uint64_t seed, int max_retries) {
    const int sources = (!from_dir.empty() ? 1 : 0) +
                        (!scenario_file.empty() ? 1 : 0) + (use_probe ? 1 : 0);
    if (sources != 1) {
        std::cerr << "detect needs exactly one of --from-dir, --scenario, "
                     "--probe\n";
        return 1;
    }
    const iet::ThresholdTable table = iet::read_threshold_table(table_file);

    iet::ArrayProvider provider;
    if (!from_dir.empty()) {
        auto files = std::make_shared<std::vector<fs::path>>(
            csv_files_in(from_dir));
        auto next = std::make_shared<std::size_t>(0);
        provider = [files, next]() -> std::optional<iet::IetArray> {
            if (*next >= files->size()) {
                return std::nullopt;
            }
            return iet::read_array_csv((*files)[(*next)++]);
        };
    } else if (!scenario_file.empty()) {
        auto spec = std::make_shared<iet::ScenarioSpec>(
            iet::read_scenario(scenario_file));
        auto counter = std::make_shared<std::uint32_t>(0);
        provider = [spec, counter, seed]() -> std::optional<iet::IetArray> {
            return iet::simulate_array(*spec,
                                       iet::derive_seed(seed, 1, ++*counter));
        };
    } else {
        provider = []() -> std::optional<iet::IetArray> {
            return iet::probe_array(iet::ProbeOptions{});
        };
    }

    const iet::DetectionVerdict verdict =
        iet::detect(provider, table, max_retries);
    // Human summary on stderr; stdout stays machine-parseable.
    std::cerr << "verdict: " << iet::verdict_kind_name(verdict.kind);
    if (verdict.hypervisor_count) {
        std::cerr << " (" << *verdict.hypervisor_count << " stacked)";
    }
    std::cerr << ", after " << verdict.arrays_examined << " array(s)\n";
    std::cout << verdict_report(verdict).dump(2) << "\n";
    return iet::verdict_exit_code(verdict.kind);
}

int run_probe(std::size_t rows, std::size_t cols, int cpu, int delay_ms,
              const std::string& out_file) {
    iet::ProbeOptions options;
    options.rows = rows;
    options.cols = cols;
    options.cpu_index = cpu;
    options.inter_column_delay_ms = delay_ms;
    const iet::IetArray array = iet::probe_array(options);
    iet::write_array_csv(out_file, array);
    std::cout << "measured " << array.rows() << "x" << array.cols() << " on "
              << array.label.value_or("unknown cpu") << ", wrote " << out_file
              << "\n";
    return 0;
}

int run_plotdata(const std::string& in_file, double level,
                 const std::string& out_prefix) {
    const iet::IetArray array = iet::read_array_csv(in_file);
    iet::emit_plot_data(array, level, out_prefix);
    std::cout << "wrote " << out_prefix << "_scatter.txt and " << out_prefix
              << "_polygon.txt\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"instruction-timing toolkit for spotting hypervisors"};
    app.require_subcommand(1);

    // simulate
    std::string sim_scenario, sim_out_dir, sim_label;
    int sim_days = 1, sim_repeats = 1;
    std::uint64_t sim_seed = 1;
    auto* sim = app.add_subcommand(
        "simulate", "generate measurement arrays from a scenario file");
    sim->add_option("--scenario", sim_scenario, "scenario JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    sim->add_option("--days", sim_days, "calendar days to simulate");
    sim->add_option("--repeats", sim_repeats, "arrays per day");
    sim->add_option("--seed", sim_seed, "base seed");
    sim->add_option("--out-dir", sim_out_dir, "output directory")->required();
    sim->add_option("--label", sim_label,
                    "condition label (default: scenario file stem)");

    // calibrate
    std::string cal_no_hv, cal_hv, cal_out;
    std::vector<std::string> cal_nested;
    auto* cal = app.add_subcommand(
        "calibrate", "derive decision thresholds from measured conditions");
    cal->add_option("--no-hv", cal_no_hv, "directory of clean arrays")
        ->required();
    cal->add_option("--hv", cal_hv, "directory of one-hypervisor arrays")
        ->required();
    cal->add_option("--nested", cal_nested,
                    "directories with 2, 3, ... stacked hypervisors");
    cal->add_option("--out", cal_out, "threshold table output file")
        ->required();

    // detect
    std::string det_table, det_dir, det_scenario;
    bool det_probe = false;
    std::uint64_t det_seed = 1;
    int det_retries = 3;
    auto* det = app.add_subcommand(
        "detect", "judge fresh arrays against a threshold table");
    det->add_option("--table", det_table, "threshold table file")
        ->required()
        ->check(CLI::ExistingFile);
    det->add_option("--from-dir", det_dir, "read arrays from a directory");
    det->add_option("--scenario", det_scenario,
                    "simulate arrays from a scenario file");
    det->add_flag("--probe", det_probe, "measure this machine");
    det->add_option("--seed", det_seed, "seed for --scenario arrays");
    det->add_option("--max-retries", det_retries,
                    "extra arrays allowed on overlap");

    // probe
    std::size_t probe_rows = 1000, probe_cols = 10;
    int probe_cpu = 0, probe_delay = 0;
    std::string probe_out;
    auto* prb = app.add_subcommand("probe", "measure this machine into a csv");
    prb->add_option("--rows", probe_rows, "measurements per column");
    prb->add_option("--cols", probe_cols, "columns");
    prb->add_option("--cpu", probe_cpu, "cpu index to pin to");
    prb->add_option("--delay-ms", probe_delay, "pause between columns");
    prb->add_option("--out", probe_out, "output csv file")->required();

    // plotdata
    std::string plot_in, plot_prefix;
    double plot_level = 0.0;
    auto* plt = app.add_subcommand(
        "plotdata", "dump scatter and frequency-polygon data for an array");
    plt->add_option("--in", plot_in, "array csv file")
        ->required()
        ->check(CLI::ExistingFile);
    plt->add_option("--level", plot_level, "filtration level");
    plt->add_option("--out-prefix", plot_prefix, "output file prefix")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (sim->parsed()) {
            return run_simulate(sim_scenario, sim_days, sim_repeats, sim_seed,
                                sim_out_dir, sim_label);
        }
        if (cal->parsed()) {
            return run_calibrate(cal_no_hv, cal_hv, cal_nested, cal_out);
        }
        if (det->parsed()) {
            return run_detect(det_table, det_dir, det_scenario, det_probe,
                              det_seed, det_retries);
        }
        if (prb->parsed()) {
            return run_probe(probe_rows, probe_cols, probe_cpu, probe_delay,
                             probe_out);
        }
        if (plt->parsed()) {
            return run_plotdata(plot_in, plot_level, plot_prefix);
        }
    } catch (const iet::Error& e) {
        std::cerr << "error (" << iet::error_code_name(e.code())
                  << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
