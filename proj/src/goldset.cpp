#include "untangle/goldset.hpp"

#include "untangle/error.hpp"
#include "untangle/hashing.hpp"
#include "untangle/rng.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

namespace untangle {

std::string_view to_string(LabelSource source) noexcept {
    switch (source) {
        case LabelSource::AutoSingleMethodFix: return "AutoSingleMethodFix";
        case LabelSource::AutoNeverInFix: return "AutoNeverInFix";
        case LabelSource::HumanRater: return "HumanRater";
    }
    return "HumanRater";
}

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

LabelSource label_source_from_string(std::string_view s) {
    if (s == "AutoSingleMethodFix") return LabelSource::AutoSingleMethodFix;
    if (s == "AutoNeverInFix") return LabelSource::AutoNeverInFix;
    if (s == "HumanRater") return LabelSource::HumanRater;
    throw Error(ErrorCode::ParseFailure, "unknown label_source " + std::string(s));
}

}  // namespace

std::vector<LabeledChange> build_automated_goldset(std::span<const MethodChange> changes,
                                                   const GoldsetOptions& options) {
    if (changes.empty()) throw Error(ErrorCode::EmptyInput, "no method changes");

    std::int64_t reference = 0;
    std::map<std::string, std::int64_t> first_seen;
    std::set<std::string> in_bugfix;
    for (const auto& c : changes) {
        reference = std::max(reference, c.commit.timestamp);
        const auto key = c.method_key();
        auto [it, inserted] = first_seen.emplace(key, c.commit.timestamp);
        if (!inserted) it->second = std::min(it->second, c.commit.timestamp);
        if (c.commit.is_bugfix) in_bugfix.insert(key);
    }
    if (options.reference_time) reference = *options.reference_time;

    std::vector<LabeledChange> out;
    for (const auto& c : changes) {
        if (c.commit.is_bugfix && c.methods_in_commit == 1)
            out.push_back({c, Label::Buggy, LabelSource::AutoSingleMethodFix, std::nullopt, std::nullopt});
    }

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < changes.size(); ++i) {
        const auto key = changes[i].method_key();
        if (in_bugfix.contains(key)) continue;
        const std::int64_t age_days = (reference - first_seen[key]) / kSecondsPerDay;
        if (age_days >= options.min_age_days) pool.push_back(i);
    }
    if (pool.size() > options.notbuggy_cap) {
        Rng rng(options.seed);
        // Partial Fisher-Yates: the first `cap` slots become a uniform sample.
        for (std::size_t i = 0; i < options.notbuggy_cap; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(options.notbuggy_cap);
        std::sort(pool.begin(), pool.end());
    }
    for (std::size_t i : pool)
        out.push_back({changes[i], Label::NotBuggy, LabelSource::AutoNeverInFix, std::nullopt, std::nullopt});

    std::unordered_set<std::string> seen_diffs;
    std::erase_if(out, [&](const LabeledChange& r) { return !seen_diffs.insert(r.change.diff_text).second; });
    return out;
}

std::vector<LabeledChange> build_automated_goldset(std::span<const MethodChange> changes, std::size_t notbuggy_cap,
                                                   std::uint64_t seed) {
    GoldsetOptions options;
    options.notbuggy_cap = notbuggy_cap;
    options.seed = seed;
    return build_automated_goldset(changes, options);
}

KappaResult cohens_kappa(std::span<const Label> a, std::span<const Label> b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::LengthMismatch,
                    "rating sequences differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    if (a.empty()) throw Error(ErrorCode::EmptyInput, "no ratings");

    std::int64_t agree = 0;
    std::int64_t a_buggy = 0;
    std::int64_t b_buggy = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == Label::Unparseable || b[i] == Label::Unparseable)
            throw Error(ErrorCode::InvalidLabel, "ratings must be Buggy or NotBuggy");
        agree += a[i] == b[i];
        a_buggy += a[i] == Label::Buggy;
        b_buggy += b[i] == Label::Buggy;
    }
    const auto n = static_cast<std::int64_t>(a.size());
    // Integer form keeps the final value correctly rounded:
    //   kappa = (n*agree - sum) / (n^2 - sum),  sum = sum over classes of row*col.
    const std::int64_t chance = a_buggy * b_buggy + (n - a_buggy) * (n - b_buggy);

    KappaResult r;
    r.n = static_cast<int>(n);
    r.observed_agreement = static_cast<double>(agree) / static_cast<double>(n);
    r.expected_agreement = static_cast<double>(chance) / static_cast<double>(n * n);
    if (chance == n * n) {
        r.degenerate = true;
        r.kappa = agree == n ? 1.0 : 0.0;
    } else {
        r.kappa = static_cast<double>(n * agree - chance) / static_cast<double>(n * n - chance);
    }
    return r;
}

json to_json(const LabeledChange& r) {
    json row = to_json(r.change);
    row["label"] = std::string(to_string(r.label));
    row["label_source"] = std::string(to_string(r.label_source));
    row["rater_id"] = r.rater_id ? json(*r.rater_id) : json(nullptr);
    row["note"] = r.note ? json(*r.note) : json(nullptr);
    return row;
}

json to_json(const KappaResult& k) {
    return json{{"kappa", k.kappa},
                {"observed_agreement", k.observed_agreement},
                {"expected_agreement", k.expected_agreement},
                {"n", k.n},
                {"degenerate", k.degenerate}};
}

LabeledChange labeled_change_from_json(const json& row) {
    LabeledChange r;
    r.change = method_change_from_json(row);
    const auto label = parse_label(row.value("label", ""));
    if (!label || *label == Label::Unparseable)
        throw Error(ErrorCode::InvalidLabel, "row " + r.change.change_id + " has no Buggy/NotBuggy label");
    r.label = *label;
    r.label_source = label_source_from_string(row.value("label_source", "HumanRater"));
    if (row.contains("rater_id") && row["rater_id"].is_string()) r.rater_id = row["rater_id"].get<std::string>();
    if (row.contains("note") && row["note"].is_string()) r.note = row["note"].get<std::string>();
    return r;
}

std::vector<LabeledChange> read_labeled_changes(const std::filesystem::path& path) {
    std::vector<LabeledChange> out;
    for (const auto& row : read_jsonl(path)) out.push_back(labeled_change_from_json(row));
    return out;
}

std::string render_dataset(std::span<const LabeledChange> records, ExportFormat format) {
    if (records.empty()) throw Error(ErrorCode::EmptyInput, "no records to export");
    std::vector<const LabeledChange*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](auto* x, auto* y) { return x->change.change_id < y->change.change_id; });

    std::string out;
    if (format == ExportFormat::Jsonl) {
        for (const auto* r : sorted) {
            out += to_json(*r).dump(-1, ' ', false, json::error_handler_t::replace);
            out += '\n';
        }
        return out;
    }
    out = "change_id,commit_id,file_path,signature,label,label_source,rater_id,note,is_bugfix,methods_in_commit,"
          "timestamp,message,diff\n";
    for (const auto* r : sorted) {
        const auto& c = r->change;
        const std::string fields[] = {c.change_id,
                                      c.commit.commit_id,
                                      c.file_path,
                                      c.method_signature,
                                      std::string(to_string(r->label)),
                                      std::string(to_string(r->label_source)),
                                      r->rater_id.value_or(""),
                                      r->note.value_or(""),
                                      c.commit.is_bugfix ? "true" : "false",
                                      std::to_string(c.methods_in_commit),
                                      std::to_string(c.commit.timestamp),
                                      c.commit.message,
                                      c.diff_text};
        for (std::size_t i = 0; i < std::size(fields); ++i) {
            if (i) out += ',';
            out += csv_field(fields[i]);
        }
        out += '\n';
    }
    return out;
}

std::string export_dataset(std::span<const LabeledChange> records, const std::filesystem::path& path,
                           ExportFormat format) {
    const std::string bytes = render_dataset(records, format);
    write_file(path, bytes);
    return sha256_hex(bytes);
}

}  // namespace untangle
