#pragma once

// CSV matrices, quantile files and model files.
//
// CSV: one sample per row; an optional header is detected by any non-numeric
// cell in the first row. JSON through nlohmann::json (vendor/json.hpp).

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "suquan/dataset.hpp"
#include "suquan/error.hpp"
#include "suquan/harness.hpp"
#include "suquan/quantiles.hpp"

namespace suquan::io {

using json = nlohmann::json;

inline constexpr int model_schema_version = 1;

struct CsvTable {
    std::vector<std::string> header;  ///< empty when the file has none
    std::size_t cols = 0;
    std::vector<double> values;       ///< row-major
    std::size_t rows() const { return cols == 0 ? 0 : values.size() / cols; }
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline std::optional<double> parse_real(std::string_view s)
{
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
    return ss.str();
}

} // namespace detail

inline CsvTable parse_csv(std::string_view text, const std::string& source = "<input>")
{
    CsvTable table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool first = true;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = detail::trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto cells = detail::split(line);
        if (first) {
            first = false;
            table.cols = cells.size();
            bool numeric = true;
            for (auto c : cells) numeric = numeric && detail::parse_real(c).has_value();
            if (!numeric) {
                for (auto c : cells) table.header.emplace_back(c);
                continue;
            }
        }
        if (cells.size() != table.cols) {
            throw InvalidInput(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.cols) +
                               " columns, found " + std::to_string(cells.size()));
        }
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const auto v = detail::parse_real(cells[k]);
            if (!v || !std::isfinite(*v)) {
                throw InvalidInput(source + ":" + std::to_string(line_no) + ": column " + std::to_string(k + 1) +
                                   ": '" + std::string(cells[k]) + "' is not a finite decimal");
            }
            table.values.push_back(*v);
        }
    }
    if (table.values.empty()) throw InvalidInput(source + ": no data rows");
    return table;
}

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(detail::read_file(path), path.string()); }

/// Writes through a temporary file in the same directory, then renames.
inline void write_atomic(const std::filesystem::path& path, std::string_view content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError("error while writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
    }
}

/// Features and (optional) label column split out of a table.
struct LabeledMatrix {
    std::vector<std::string> feature_names;  ///< empty when the file had no header
    std::size_t n = 0, p = 0;
    std::vector<double> features;
    std::optional<std::vector<double>> labels;
    std::string label_name = "label";
};

/**
 * label_col: header name or 0-based column index. Without it, a header
 * column named "label" is used; a headerless file uses its last column when
 * require_label is set and has no label otherwise.
 */
inline LabeledMatrix split_label(const CsvTable& t, const std::optional<std::string>& label_col, bool require_label)
{
    std::optional<std::size_t> col;
    if (label_col) {
        for (std::size_t k = 0; k < t.header.size(); ++k) {
            if (t.header[k] == *label_col) col = k;
        }
        if (!col) {
            const auto idx = detail::parse_real(*label_col);
            if (!idx || *idx < 0 || *idx != std::floor(*idx) || *idx >= static_cast<double>(t.cols)) {
                throw InvalidInput("label column '" + *label_col + "' not found");
            }
            col = static_cast<std::size_t>(*idx);
        }
    } else if (!t.header.empty()) {
        for (std::size_t k = 0; k < t.header.size(); ++k) {
            if (t.header[k] == "label") col = k;
        }
    } else if (require_label) {
        col = t.cols - 1;
    }
    if (require_label && !col) throw InvalidInput("no label column (name one 'label' or pass --label-col)");

    LabeledMatrix m;
    m.n = t.rows();
    m.p = t.cols - (col ? 1 : 0);
    if (m.p == 0) throw InvalidInput("table has no feature columns");
    if (col && !t.header.empty()) m.label_name = t.header[*col];
    for (std::size_t k = 0; k < t.header.size(); ++k) {
        if (!col || k != *col) m.feature_names.push_back(t.header[k]);
    }
    m.features.reserve(m.n * m.p);
    if (col) m.labels.emplace().reserve(m.n);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t k = 0; k < t.cols; ++k) {
            const double v = t.values[i * t.cols + k];
            if (col && k == *col) m.labels->push_back(v);
            else m.features.push_back(v);
        }
    }
    return m;
}

inline Dataset load_dataset(const std::filesystem::path& path, const std::optional<std::string>& label_col,
                            bool require_label = true)
{
    auto m = split_label(read_csv(path), label_col, require_label);
    std::vector<double> labels = m.labels ? std::move(*m.labels) : std::vector<double>(m.n, 0.0);
    return Dataset(std::move(m.features), m.n, m.p, std::move(labels), path.filename().string());
}

/// CSV text with a header x0..x{p-1}[,label].
inline std::string format_csv(std::span<const double> features, std::size_t n, std::size_t p,
                              std::optional<std::span<const double>> labels,
                              const std::vector<std::string>& names = {}, const std::string& label_name = "label")
{
    std::string out;
    for (std::size_t j = 0; j < p; ++j) {
        if (j) out += ',';
        out += names.size() == p ? names[j] : "x" + std::to_string(j);
    }
    if (labels) out += "," + label_name;
    out += '\n';
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            if (j) out += ',';
            out += format_real(features[i * p + j]);
        }
        if (labels) out += "," + format_real((*labels)[i]);
        out += '\n';
    }
    return out;
}

/// FNV-1a over the bytes of the features, then the labels.
inline std::uint64_t dataset_hash(const Dataset& data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::span<const double> v) {
        for (double x : v) {
            const auto* bytes = reinterpret_cast<const unsigned char*>(&x);
            for (std::size_t k = 0; k < sizeof x; ++k) {
                h ^= bytes[k];
                h *= 0x100000001b3ULL;
            }
        }
    };
    mix(data.features());
    mix(data.labels());
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// Model files

struct ModelMetadata {
    std::uint64_t seed = 0;
    std::string dataset_hash;
    std::string quantile_source;
    std::optional<json> cv;  ///< cross-validation summary when --cv was used
};

struct ModelFile {
    TrainedModel trained;
    ModelMetadata metadata;
};

inline json to_json(const ModelFile& m)
{
    const auto& t = m.trained;
    json j;
    j["schema_version"] = model_schema_version;
    j["method"] = std::string(method_name(t.method));
    j["quantile"] = t.quantile ? json(std::vector<double>(t.quantile->values().begin(), t.quantile->values().end()))
                               : json(nullptr);
    j["quantile_monotone"] = t.quantile && t.quantile->monotone();
    j["w"] = t.model.w;
    j["b"] = t.model.b;
    j["loss"] = std::string(loss_name(t.model.loss));
    j["lambda"] = t.model.lambda;
    j["gamma"] = t.gamma;
    json meta;
    meta["seed"] = m.metadata.seed;
    meta["dataset_hash"] = m.metadata.dataset_hash;
    meta["quantile_source"] = m.metadata.quantile_source;
    meta["rounds"] = t.rounds;
    meta["objective_history"] = t.objective_history;
    meta["converged"] = t.converged;
    if (m.metadata.cv) meta["cv"] = *m.metadata.cv;
    j["metadata"] = meta;
    return j;
}

inline ModelFile model_from_json(const json& j, const std::string& source = "<model>")
{
    try {
        if (!j.is_object()) throw InvalidInput(source + ": model file must be a JSON object");
        const int version = j.at("schema_version").get<int>();
        if (version != model_schema_version) {
            throw InvalidInput(source + ": unsupported schema_version " + std::to_string(version) + " (expected " +
                               std::to_string(model_schema_version) + ")");
        }
        ModelFile m;
        const auto method = parse_method(j.at("method").get<std::string>());
        if (!method) throw InvalidInput(source + ": unknown method '" + j.at("method").get<std::string>() + "'");
        m.trained.method = *method;
        if (!j.at("quantile").is_null()) {
            const bool monotone = j.value("quantile_monotone", false);
            m.trained.quantile = TargetQuantile(j.at("quantile").get<std::vector<double>>(), monotone);
        }
        m.trained.model.w = j.at("w").get<std::vector<double>>();
        m.trained.model.b = j.at("b").get<double>();
        const auto loss = j.at("loss").get<std::string>();
        if (loss == "logistic") m.trained.model.loss = LossKind::logistic;
        else if (loss == "squared") m.trained.model.loss = LossKind::squared;
        else throw InvalidInput(source + ": unknown loss '" + loss + "'");
        m.trained.model.lambda = j.at("lambda").get<double>();
        m.trained.gamma = j.at("gamma").get<double>();
        if (m.trained.quantile) {
            if (m.trained.model.w.size() != m.trained.quantile->size()) {
                throw DimensionMismatch(source + ": quantile vs w", m.trained.model.w.size(), m.trained.quantile->size());
            }
        }
        const auto& meta = j.at("metadata");
        m.metadata.seed = meta.value("seed", std::uint64_t{0});
        m.metadata.dataset_hash = meta.value("dataset_hash", std::string{});
        m.metadata.quantile_source = meta.value("quantile_source", std::string{});
        m.trained.rounds = meta.value("rounds", std::size_t{0});
        m.trained.objective_history = meta.value("objective_history", std::vector<double>{});
        m.trained.converged = meta.value("converged", true);
        if (meta.contains("cv")) m.metadata.cv = meta.at("cv");
        return m;
    } catch (const json::exception& e) {
        throw InvalidInput(source + ": malformed model file: " + e.what());
    }
}

inline void write_model(const std::filesystem::path& path, const ModelFile& m)
{
    write_atomic(path, to_json(m).dump(2) + "\n");
}

inline ModelFile read_model(const std::filesystem::path& path)
{
    json j;
    try {
        j = json::parse(detail::read_file(path));
    } catch (const json::parse_error& e) {
        throw InvalidInput(path.string() + ": invalid JSON: " + e.what());
    }
    return model_from_json(j, path.string());
}

/**
 * Quantile vector from a file: a JSON array, a model file (its quantile), or
 * CSV/plain text whose numbers are read in order.
 */
inline std::vector<double> read_quantile_file(const std::filesystem::path& path)
{
    const auto text = detail::read_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw InvalidInput(path.string() + ": invalid JSON: " + e.what());
        }
        if (j.is_array()) {
            try {
                return j.get<std::vector<double>>();
            } catch (const json::exception& e) {
                throw InvalidInput(path.string() + ": quantile array must hold numbers");
            }
        }
        const auto m = model_from_json(j, path.string());
        if (!m.trained.quantile) throw InvalidInput(path.string() + ": model has no quantile");
        return {m.trained.quantile->values().begin(), m.trained.quantile->values().end()};
    }
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto start = text.find_first_not_of(", \t\r\n", pos);
        if (start == std::string::npos) break;
        auto end = text.find_first_of(", \t\r\n", start);
        if (end == std::string::npos) end = text.size();
        const auto token = std::string_view(text).substr(start, end - start);
        const auto v = detail::parse_real(token);
        if (!v || !std::isfinite(*v)) {
            throw InvalidInput(path.string() + ": '" + std::string(token) + "' is not a finite decimal");
        }
        values.push_back(*v);
        pos = end;
    }
    if (values.empty()) throw InvalidInput(path.string() + ": empty quantile file");
    return values;
}

} // namespace suquan::io
