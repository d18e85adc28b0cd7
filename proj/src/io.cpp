#include "ietkit/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "ietkit/stats.hpp"

namespace iet {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::filesystem::path& path, int line,
                            const std::string& what) {
    throw Error(ErrorCode::MalformedCsv,
                path.string() + ": line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string::size_type start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        std::string field = line.substr(
            start, comma == std::string::npos ? std::string::npos
                                              : comma - start);
        const auto first = field.find_first_not_of(" \t");
        const auto last = field.find_last_not_of(" \t");
        fields.push_back(first == std::string::npos
                             ? std::string{}
                             : field.substr(first, last - first + 1));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return fields;
}

bool parse_ticks(const std::string& field, Ticks& out) {
    if (field.empty()) {
        return false;
    }
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc{} && result.ptr == end;
}

bool parse_int(const std::string& field, int& out) {
    if (field.empty()) {
        return false;
    }
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc{} && result.ptr == end;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

} // namespace

IetArray read_array_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::MalformedCsv, "cannot open " + path.string());
    }

    std::optional<std::string> label;
    std::optional<int> day_index;
    std::optional<int> repeat_index;
    std::vector<Series> row_major;
    std::size_t cols = 0;
    bool header_allowed = true;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const std::string body = trim(line.substr(1));
            const auto eq = body.find('=');
            if (eq == std::string::npos) {
                continue;  // free-form comment
            }
            const std::string key = trim(body.substr(0, eq));
            const std::string value = trim(body.substr(eq + 1));
            if (key == "label") {
                label = value;
            } else if (key == "day" || key == "repeat") {
                int parsed = 0;
                if (!parse_int(value, parsed)) {
                    malformed(path, lineno, "metadata '" + key +
                                                "' needs an integer, got '" +
                                                value + "'");
                }
                (key == "day" ? day_index : repeat_index) = parsed;
            }
            // other keys are treated as comments
            continue;
        }

        const auto fields = split_fields(line);
        Ticks probe_value = 0;
        if (header_allowed && !parse_ticks(fields.front(), probe_value)) {
            // Non-numeric first data-ish line: the column header.
            cols = fields.size();
            header_allowed = false;
            continue;
        }
        header_allowed = false;

        if (cols == 0) {
            cols = fields.size();
        } else if (fields.size() != cols) {
            malformed(path, lineno,
                      "expected " + std::to_string(cols) + " fields, got " +
                          std::to_string(fields.size()));
        }
        Series row;
        row.reserve(cols);
        for (const std::string& field : fields) {
            Ticks v = 0;
            if (!parse_ticks(field, v)) {
                malformed(path, lineno,
                          "'" + field + "' is not an unsigned integer");
            }
            if (v == 0) {
                malformed(path, lineno, "tick counts must be positive");
            }
            row.push_back(v);
        }
        row_major.push_back(std::move(row));
    }

    if (row_major.empty()) {
        throw Error(ErrorCode::MalformedCsv,
                    path.string() + ": no data rows");
    }

    const std::size_t rows = row_major.size();
    Series flat(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            flat[c * rows + r] = row_major[r][c];
        }
    }
    IetArray array(rows, cols, std::move(flat));
    array.label = std::move(label);
    array.day_index = day_index;
    array.repeat_index = repeat_index;
    return array;
}

void write_array_csv(const std::filesystem::path& path, const IetArray& array) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::InvalidArgument,
                    "cannot write " + path.string());
    }
    if (array.label) {
        out << "# label=" << *array.label << "\n";
    }
    if (array.day_index) {
        out << "# day=" << *array.day_index << "\n";
    }
    if (array.repeat_index) {
        out << "# repeat=" << *array.repeat_index << "\n";
    }
    for (std::size_t c = 0; c < array.cols(); ++c) {
        out << (c == 0 ? "" : ",") << "col_" << (c + 1);
    }
    out << "\n";
    for (std::size_t r = 0; r < array.rows(); ++r) {
        for (std::size_t c = 0; c < array.cols(); ++c) {
            out << (c == 0 ? "" : ",") << array.at(r, c);
        }
        out << "\n";
    }
    if (!out) {
        throw Error(ErrorCode::InvalidArgument,
                    "failed writing " + path.string());
    }
}

namespace {

void check_fields(const json& j, const char* context,
                  std::initializer_list<const char*> known) {
    if (!j.is_object()) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(context) + " must be an object");
    }
    for (const auto& item : j.items()) {
        const bool ok = std::any_of(known.begin(), known.end(),
                                    [&](const char* k) { return item.key() == k; });
        if (!ok) {
            throw Error(ErrorCode::UnknownField,
                        std::string(context) + ": unknown field '" +
                            item.key() + "'");
        }
    }
}

const json& field(const json& j, const char* context, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw Error(ErrorCode::MissingField,
                    std::string(context) + ": missing field '" + key + "'");
    }
    return *it;
}

double as_double(const json& v, const std::string& what) {
    if (!v.is_number()) {
        throw Error(ErrorCode::InvalidArgument, what + " must be a number");
    }
    return v.get<double>();
}

std::uint64_t as_u64(const json& v, const std::string& what) {
    if (v.is_number_unsigned()) {
        return v.get<std::uint64_t>();
    }
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw Error(ErrorCode::InvalidArgument,
                what + " must be a non-negative integer");
}

int as_int(const json& v, const std::string& what) {
    if (!v.is_number_integer()) {
        throw Error(ErrorCode::InvalidArgument, what + " must be an integer");
    }
    return v.get<int>();
}

TickRange range_from_json(const json& v, const std::string& what) {
    if (!v.is_array() || v.size() != 2) {
        throw Error(ErrorCode::InvalidArgument,
                    what + " must be a [lo, hi] pair");
    }
    return TickRange{as_u64(v[0], what + "[0]"), as_u64(v[1], what + "[1]")};
}

json range_to_json(const TickRange& r) {
    return json::array({r.lo, r.hi});
}

} // namespace

ScenarioSpec scenario_from_json(const json& j) {
    static constexpr const char* kContext = "scenario";
    check_fields(j, kContext,
                 {"base_ticks", "tick_quantum", "smi_rate", "smi_cost",
                  "dispatchers", "cheat", "blue_chicken", "outlier_prob",
                  "outlier_magnitude", "jump_prob", "jump_magnitude",
                  "jump_run_length", "rows", "cols"});

    ScenarioSpec spec;
    spec.base_ticks = as_u64(field(j, kContext, "base_ticks"), "base_ticks");
    spec.tick_quantum =
        as_u64(field(j, kContext, "tick_quantum"), "tick_quantum");
    spec.smi_rate = as_double(field(j, kContext, "smi_rate"), "smi_rate");

    const json& cost = field(j, kContext, "smi_cost");
    check_fields(cost, "smi_cost", {"mean", "spread"});
    spec.smi_cost.mean = as_double(field(cost, "smi_cost", "mean"),
                                   "smi_cost.mean");
    spec.smi_cost.spread = as_double(field(cost, "smi_cost", "spread"),
                                     "smi_cost.spread");

    const json& dispatchers = field(j, kContext, "dispatchers");
    if (!dispatchers.is_array()) {
        throw Error(ErrorCode::InvalidArgument, "dispatchers must be an array");
    }
    for (const json& d : dispatchers) {
        check_fields(d, "dispatcher", {"overhead_mean", "overhead_spread"});
        DispatcherSpec ds;
        ds.overhead_mean = as_double(field(d, "dispatcher", "overhead_mean"),
                                     "dispatcher.overhead_mean");
        ds.overhead_spread = as_double(field(d, "dispatcher", "overhead_spread"),
                                       "dispatcher.overhead_spread");
        spec.dispatchers.push_back(ds);
    }

    const json& cheat = field(j, kContext, "cheat");
    check_fields(cheat, "cheat", {"mode", "target_mean"});
    const json& mode = field(cheat, "cheat", "mode");
    if (!mode.is_string()) {
        throw Error(ErrorCode::InvalidArgument, "cheat.mode must be a string");
    }
    const std::string mode_name = mode.get<std::string>();
    if (mode_name == "off") {
        spec.cheat.mode = CheatSpec::Mode::Off;
    } else if (mode_name == "match_mean") {
        spec.cheat.mode = CheatSpec::Mode::MatchMean;
    } else {
        throw Error(ErrorCode::InvalidArgument,
                    "cheat.mode must be 'off' or 'match_mean', got '" +
                        mode_name + "'");
    }
    if (cheat.contains("target_mean")) {
        spec.cheat.target_mean =
            as_u64(cheat.at("target_mean"), "cheat.target_mean");
    } else if (spec.cheat.mode == CheatSpec::Mode::MatchMean) {
        throw Error(ErrorCode::MissingField,
                    "cheat: missing field 'target_mean'");
    }

    const json& bc = field(j, kContext, "blue_chicken");
    if (!bc.is_null()) {
        check_fields(bc, "blue_chicken", {"uninstall_after"});
        const json& window = field(bc, "blue_chicken", "uninstall_after");
        if (!window.is_array() || window.size() != 2) {
            throw Error(ErrorCode::InvalidArgument,
                        "blue_chicken.uninstall_after must be a [lo, hi] pair");
        }
        BlueChickenSpec b;
        b.uninstall_lo = static_cast<std::uint32_t>(
            as_u64(window[0], "blue_chicken.uninstall_after[0]"));
        b.uninstall_hi = static_cast<std::uint32_t>(
            as_u64(window[1], "blue_chicken.uninstall_after[1]"));
        spec.blue_chicken = b;
    }

    spec.outlier_prob =
        as_double(field(j, kContext, "outlier_prob"), "outlier_prob");
    spec.outlier_magnitude = range_from_json(
        field(j, kContext, "outlier_magnitude"), "outlier_magnitude");
    spec.jump_prob = as_double(field(j, kContext, "jump_prob"), "jump_prob");
    spec.jump_magnitude =
        range_from_json(field(j, kContext, "jump_magnitude"), "jump_magnitude");
    spec.jump_run_length =
        as_double(field(j, kContext, "jump_run_length"), "jump_run_length");
    spec.rows = as_u64(field(j, kContext, "rows"), "rows");
    spec.cols = as_u64(field(j, kContext, "cols"), "cols");

    spec.validate();
    return spec;
}

json scenario_to_json(const ScenarioSpec& spec) {
    json j;
    j["base_ticks"] = spec.base_ticks;
    j["tick_quantum"] = spec.tick_quantum;
    j["smi_rate"] = spec.smi_rate;
    j["smi_cost"] = {{"mean", spec.smi_cost.mean},
                     {"spread", spec.smi_cost.spread}};
    j["dispatchers"] = json::array();
    for (const DispatcherSpec& d : spec.dispatchers) {
        j["dispatchers"].push_back({{"overhead_mean", d.overhead_mean},
                                    {"overhead_spread", d.overhead_spread}});
    }
    j["cheat"] = {
        {"mode", spec.cheat.mode == CheatSpec::Mode::Off ? "off" : "match_mean"},
        {"target_mean", spec.cheat.target_mean}};
    if (spec.blue_chicken) {
        j["blue_chicken"] = {
            {"uninstall_after", json::array({spec.blue_chicken->uninstall_lo,
                                             spec.blue_chicken->uninstall_hi})}};
    } else {
        j["blue_chicken"] = nullptr;
    }
    j["outlier_prob"] = spec.outlier_prob;
    j["outlier_magnitude"] = range_to_json(spec.outlier_magnitude);
    j["jump_prob"] = spec.jump_prob;
    j["jump_magnitude"] = range_to_json(spec.jump_magnitude);
    j["jump_run_length"] = spec.jump_run_length;
    j["rows"] = spec.rows;
    j["cols"] = spec.cols;
    return j;
}

namespace {

json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw Error(ErrorCode::InvalidArgument,
                    path.string() + " is not valid JSON");
    }
    return j;
}

void write_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    }
    out << j.dump(2) << "\n";
    if (!out) {
        throw Error(ErrorCode::InvalidArgument, "failed writing " + path.string());
    }
}

} // namespace

ScenarioSpec read_scenario(const std::filesystem::path& path) {
    return scenario_from_json(parse_file(path));
}

void write_scenario(const std::filesystem::path& path, const ScenarioSpec& spec) {
    write_file(path, scenario_to_json(spec));
}

namespace {

VariationInterval interval_from_json(const json& v, const std::string& what) {
    check_fields(v, what.c_str(),
                 {"s_min", "s_max", "sample_count", "confidence"});
    VariationInterval interval;
    interval.s_min = as_double(field(v, what.c_str(), "s_min"), what + ".s_min");
    interval.s_max = as_double(field(v, what.c_str(), "s_max"), what + ".s_max");
    interval.sample_count = static_cast<std::size_t>(
        as_u64(field(v, what.c_str(), "sample_count"), what + ".sample_count"));
    interval.confidence =
        as_double(field(v, what.c_str(), "confidence"), what + ".confidence");

    if (interval.sample_count < 1) {
        throw Error(ErrorCode::InvalidTable,
                    what + ": sample_count must be positive");
    }
    if (!(interval.s_min <= interval.s_max)) {
        throw Error(ErrorCode::InvalidTable, what + ": s_min must not exceed s_max");
    }
    const double expected = 1.0 - std::ldexp(1.0, -static_cast<int>(
                                                      interval.sample_count - 1));
    if (interval.confidence != expected) {
        throw Error(ErrorCode::InvalidTable,
                    what + ": confidence does not match its sample count");
    }
    return interval;
}

json interval_to_json(const VariationInterval& interval) {
    return {{"s_min", interval.s_min},
            {"s_max", interval.s_max},
            {"sample_count", interval.sample_count},
            {"confidence", interval.confidence}};
}

} // namespace

ThresholdTable threshold_table_from_json(const json& j) {
    static constexpr const char* kContext = "threshold_table";
    check_fields(j, kContext,
                 {"chosen_filtration_level", "entries", "nested_bands"});
    ThresholdTable table;
    table.chosen_filtration_level =
        as_double(field(j, kContext, "chosen_filtration_level"),
                  "chosen_filtration_level");

    const json& entries = field(j, kContext, "entries");
    if (!entries.is_array()) {
        throw Error(ErrorCode::InvalidArgument, "entries must be an array");
    }
    for (const json& e : entries) {
        check_fields(e, "entry",
                     {"statistic", "filtration_level", "no_hv_upper", "hv_lower",
                      "type1_error", "type2_error", "no_hv_interval",
                      "hv_interval"});
        ThresholdEntry entry;
        const json& kind = field(e, "entry", "statistic");
        if (!kind.is_string()) {
            throw Error(ErrorCode::InvalidArgument,
                        "entry.statistic must be a string");
        }
        try {
            entry.statistic = parse_statistic_kind(kind.get<std::string>());
        } catch (const Error&) {
            throw Error(ErrorCode::InvalidTable,
                        "entry.statistic '" + kind.get<std::string>() +
                            "' is not a known statistic");
        }
        entry.filtration_level = as_double(
            field(e, "entry", "filtration_level"), "entry.filtration_level");
        entry.no_hv_upper =
            as_double(field(e, "entry", "no_hv_upper"), "entry.no_hv_upper");
        const json& hv_lower = field(e, "entry", "hv_lower");
        if (!hv_lower.is_null()) {
            entry.hv_lower = as_double(hv_lower, "entry.hv_lower");
        }
        entry.type1_error =
            as_double(field(e, "entry", "type1_error"), "entry.type1_error");
        entry.type2_error =
            as_double(field(e, "entry", "type2_error"), "entry.type2_error");
        entry.no_hv_interval = interval_from_json(
            field(e, "entry", "no_hv_interval"), "entry.no_hv_interval");
        const json& hv_interval = field(e, "entry", "hv_interval");
        if (!hv_interval.is_null()) {
            entry.hv_interval =
                interval_from_json(hv_interval, "entry.hv_interval");
        }
        table.entries.push_back(entry);
    }

    const json& bands = field(j, kContext, "nested_bands");
    if (!bands.is_array()) {
        throw Error(ErrorCode::InvalidArgument, "nested_bands must be an array");
    }
    for (const json& b : bands) {
        check_fields(b, "band",
                     {"lower", "upper", "hypervisor_count", "type1_error",
                      "type2_error"});
        NestedBand band;
        const json& lower = field(b, "band", "lower");
        if (!lower.is_null()) {
            band.lower = as_double(lower, "band.lower");
        }
        const json& upper = field(b, "band", "upper");
        if (!upper.is_null()) {
            band.upper = as_double(upper, "band.upper");
        }
        band.hypervisor_count =
            as_int(field(b, "band", "hypervisor_count"), "band.hypervisor_count");
        band.type1_error =
            as_double(field(b, "band", "type1_error"), "band.type1_error");
        band.type2_error =
            as_double(field(b, "band", "type2_error"), "band.type2_error");
        table.nested_bands.push_back(band);
    }

    table.validate();  // throws InvalidTable on any structural violation
    return table;
}

json threshold_table_to_json(const ThresholdTable& table) {
    json j;
    j["chosen_filtration_level"] = table.chosen_filtration_level;
    j["entries"] = json::array();
    for (const ThresholdEntry& e : table.entries) {
        json entry;
        entry["statistic"] = statistic_kind_name(e.statistic);
        entry["filtration_level"] = e.filtration_level;
        entry["no_hv_upper"] = e.no_hv_upper;
        entry["hv_lower"] = e.hv_lower ? json(*e.hv_lower) : json(nullptr);
        entry["type1_error"] = e.type1_error;
        entry["type2_error"] = e.type2_error;
        entry["no_hv_interval"] = interval_to_json(e.no_hv_interval);
        entry["hv_interval"] =
            e.hv_interval ? interval_to_json(*e.hv_interval) : json(nullptr);
        j["entries"].push_back(entry);
    }
    j["nested_bands"] = json::array();
    for (const NestedBand& b : table.nested_bands) {
        json band;
        band["lower"] = b.lower ? json(*b.lower) : json(nullptr);
        band["upper"] = b.upper ? json(*b.upper) : json(nullptr);
        band["hypervisor_count"] = b.hypervisor_count;
        band["type1_error"] = b.type1_error;
        band["type2_error"] = b.type2_error;
        j["nested_bands"].push_back(band);
    }
    return j;
}

ThresholdTable read_threshold_table(const std::filesystem::path& path) {
    return threshold_table_from_json(parse_file(path));
}

void write_threshold_table(const std::filesystem::path& path,
                           const ThresholdTable& table) {
    write_file(path, threshold_table_to_json(table));
}

void emit_plot_data(const IetArray& array, double filtration_level,
                    const std::filesystem::path& out_prefix) {
    const Series vec = vectorize(array);

    std::filesystem::path scatter_path = out_prefix;
    scatter_path += "_scatter.txt";
    std::ofstream scatter(scatter_path);
    if (!scatter) {
        throw Error(ErrorCode::InvalidArgument,
                    "cannot write " + scatter_path.string());
    }
    scatter << "# index,ticks\n";
    for (std::size_t i = 0; i < vec.size(); ++i) {
        scatter << i << "," << vec[i] << "\n";
    }

    std::filesystem::path polygon_path = out_prefix;
    polygon_path += "_polygon.txt";
    std::ofstream polygon(polygon_path);
    if (!polygon) {
        throw Error(ErrorCode::InvalidArgument,
                    "cannot write " + polygon_path.string());
    }
    polygon << "# ticks,relative_frequency\n";
    try {
        const Series kept = low_frequency_filter(vec, filtration_level);
        for (const auto& [value, share] : frequency_classes(kept)) {
            polygon << value << "," << share << "\n";
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::AllFiltered) {
            throw;
        }
        // nothing survives the filter: the polygon is legitimately empty
    }
    if (!scatter || !polygon) {
        throw Error(ErrorCode::InvalidArgument,
                    "failed writing plot data for prefix " +
                        out_prefix.string());
    }
}

std::uint64_t scenario_fingerprint(const ScenarioSpec& spec) {
    const std::string canonical = scenario_to_json(spec).dump();
    std::uint64_t hash = 1469598103934665603ull;  // FNV-1a 64
    for (unsigned char ch : canonical) {
        hash ^= ch;
        hash *= 1099511628211ull;
    }
    return hash;
}

int verdict_exit_code(VerdictKind kind) {
    switch (kind) {
    case VerdictKind::NoHypervisor:           return 0;
    case VerdictKind::HypervisorsPresent:     return 2;
    case VerdictKind::IndeterminateRemeasure: return 3;
    case VerdictKind::BlueChickenSuspect:     return 4;
    }
    return 1;
}

} // namespace iet
