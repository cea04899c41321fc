#include "untangle/denoiser.hpp"

#include "untangle/error.hpp"
#include "untangle/llm.hpp"

#include <algorithm>
#include <iostream>
#include <stdexcept>

namespace untangle {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

bool subset(const std::set<std::string>& a, const std::set<std::string>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

std::vector<MethodHistory> build_histories(std::span<const MethodChange> changes, const std::string& project,
                                           std::optional<std::int64_t> reference_time) {
    std::map<std::string, std::vector<const MethodChange*>> grouped;
    std::int64_t latest = 0;
    for (const auto& c : changes) {
        grouped[c.method_key()].push_back(&c);
        latest = std::max(latest, c.commit.timestamp);
    }
    const std::int64_t reference = reference_time.value_or(latest);

    std::vector<MethodHistory> out;
    out.reserve(grouped.size());
    for (auto& [key, list] : grouped) {
        std::stable_sort(list.begin(), list.end(), [](const MethodChange* a, const MethodChange* b) {
            return a->commit.timestamp < b->commit.timestamp;
        });
        MethodHistory h;
        h.method_id = project.empty() ? key : project + "/" + key;
        h.project = project;
        const MethodChange& first = *list.front();
        h.first_version_source = first.before_source.value_or(first.after_source.value_or(""));
        h.age_days = std::max<std::int64_t>(0, (reference - first.commit.timestamp) / kSecondsPerDay);
        for (const auto* c : list) h.changes.push_back(*c);
        out.push_back(std::move(h));
    }
    return out;
}

void PartitionSet::check_invariants() const {
    if (!subset(less_noisy_buggy, noisy_buggy)) throw std::logic_error("less_noisy_buggy is not within noisy_buggy");
    if (!subset(noisy_notbuggy, less_noisy_notbuggy))
        throw std::logic_error("noisy_notbuggy is not within less_noisy_notbuggy");
    for (const auto& m : less_noisy_buggy)
        if (less_noisy_notbuggy.contains(m)) throw std::logic_error("method " + m + " is in both less-noisy sets");
}

BatchVerdictFn batch_of(VerdictFn fn) {
    return [fn = std::move(fn)](std::span<const MethodChange> changes) {
        std::vector<Label> out;
        out.reserve(changes.size());
        for (const auto& c : changes) out.push_back(fn(c));
        return out;
    };
}

BatchVerdictFn gateway_verdicts(Gateway& gateway, PromptVariant variant, const RenderOptions& options) {
    return [&gateway, variant, options](std::span<const MethodChange> changes) {
        std::vector<Label> out(changes.size(), Label::Unparseable);
        std::vector<PromptText> prompts;
        std::vector<std::size_t> slots;
        for (std::size_t i = 0; i < changes.size(); ++i) {
            try {
                prompts.push_back(render_prompt(variant, changes[i], options));
                slots.push_back(i);
            } catch (const Error& e) {
                std::cerr << "untangle: " << changes[i].change_id << ": " << e.what() << '\n';
            }
        }
        try {
            const auto verdicts = gateway.classify_batch(prompts);
            for (std::size_t k = 0; k < slots.size(); ++k) out[slots[k]] = verdicts[k].label;
            return out;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::AuthFailure) throw;
        }
        // Something in the batch failed; retry one by one so the rest survive.
        for (std::size_t k = 0; k < slots.size(); ++k) {
            try {
                out[slots[k]] = gateway.classify(prompts[k]).label;
            } catch (const Error& e) {
                if (e.code() == ErrorCode::AuthFailure) throw;
                std::cerr << "untangle: " << changes[slots[k]].change_id << ": " << e.what() << '\n';
            }
        }
        return out;
    };
}

PartitionSet build_less_noisy(std::span<const MethodHistory> histories, const BatchVerdictFn& verdicts,
                              std::int64_t min_age_days) {
    // Every multi-method bug-fix change, once, in change_id order.
    std::map<std::string, const MethodChange*> queried;
    for (const auto& h : histories)
        for (const auto& c : h.changes)
            if (c.commit.is_bugfix && c.methods_in_commit > 1) queried.emplace(c.change_id, &c);

    std::vector<MethodChange> batch;
    batch.reserve(queried.size());
    for (const auto& [id, c] : queried) batch.push_back(*c);
    std::map<std::string, Label> verdict_of;
    if (!batch.empty()) {
        const auto labels = verdicts(batch);
        if (labels.size() != batch.size())
            throw Error(ErrorCode::LengthMismatch, "verdict source returned " + std::to_string(labels.size()) +
                                                       " labels for " + std::to_string(batch.size()) + " changes");
        for (std::size_t i = 0; i < batch.size(); ++i) verdict_of[batch[i].change_id] = labels[i];
    }

    PartitionSet ps;
    ps.verdict_queries = batch.size();
    for (const auto& h : histories) {
        ps.project_of[h.method_id] = h.project;
        auto& counts = ps.per_project_counts[h.project];
        bool any_fix = false;
        bool any_buggy = false;
        bool any_unparseable = false;
        for (const auto& c : h.changes) {
            if (!c.commit.is_bugfix) continue;
            any_fix = true;
            const Label l = c.methods_in_commit <= 1 ? Label::Buggy : verdict_of.at(c.change_id);
            any_buggy |= l == Label::Buggy;
            any_unparseable |= l == Label::Unparseable;
        }
        if (!any_fix) {
            if (h.age_days >= min_age_days) {
                ps.noisy_notbuggy.insert(h.method_id);
                ps.less_noisy_notbuggy.insert(h.method_id);
                ++counts.noisy_notbuggy;
                ++counts.less_noisy_notbuggy;
            }
            continue;
        }
        ps.noisy_buggy.insert(h.method_id);
        ++counts.noisy_buggy;
        if (any_buggy) {
            ps.less_noisy_buggy.insert(h.method_id);
            ++counts.less_noisy_buggy;
        } else if (any_unparseable) {
            ps.quarantined.insert(h.method_id);
            ++counts.quarantined;
        } else {
            ps.less_noisy_notbuggy.insert(h.method_id);
            ++counts.less_noisy_notbuggy;
        }
    }
    ps.check_invariants();
    return ps;
}

double metric_value(const CodeMetrics& m, std::string_view name) {
    if (name == "size") return static_cast<double>(m.size);
    if (name == "readability") return m.readability;
    if (name == "mccabe") return static_cast<double>(m.mccabe);
    if (name == "fan_out") return static_cast<double>(m.fan_out);
    if (name == "mi") return m.mi;
    throw Error(ErrorCode::InvalidArgument, "unknown metric " + std::string(name));
}

SeparabilityReport separability_report(const PartitionSet& ps, const std::map<std::string, CodeMetrics>& metrics) {
    struct Sides {
        std::vector<std::string> nb, nn, lb, ln;
    };
    std::map<std::string, Sides> by_project;
    const auto project = [&](const std::string& id) {
        auto it = ps.project_of.find(id);
        return it == ps.project_of.end() ? std::string() : it->second;
    };
    const auto collect = [&](const std::set<std::string>& set, std::vector<std::string> Sides::*side) {
        for (const auto& id : set) {
            if (!metrics.contains(id)) throw Error(ErrorCode::MissingMetrics, "no metrics for method " + id);
            (by_project[project(id)].*side).push_back(id);
        }
    };
    collect(ps.noisy_buggy, &Sides::nb);
    collect(ps.noisy_notbuggy, &Sides::nn);
    collect(ps.less_noisy_buggy, &Sides::lb);
    collect(ps.less_noisy_notbuggy, &Sides::ln);
    for (const auto& [name, counts] : ps.per_project_counts) by_project[name];

    SeparabilityReport report;
    for (const auto& [name, s] : by_project) {
        if (s.nb.empty() || s.lb.empty()) {
            report.excluded[name] = "no Buggy methods";
            continue;
        }
        if (s.nn.empty() || s.ln.empty()) {
            report.excluded[name] = "no NotBuggy methods";
            continue;
        }
        for (auto metric : kMetricNames) {
            const auto values = [&](const std::vector<std::string>& ids) {
                std::vector<double> v;
                v.reserve(ids.size());
                for (const auto& id : ids) v.push_back(metric_value(metrics.at(id), metric));
                return v;
            };
            const auto row = [&](std::string dataset, const std::vector<std::string>& buggy,
                                 const std::vector<std::string>& notbuggy) {
                const auto a = values(buggy);
                const auto b = values(notbuggy);
                SeparabilityRow r;
                r.project = name;
                r.metric = std::string(metric);
                r.dataset = std::move(dataset);
                r.p_value = rank_sum_test(a, b).p_two_sided;
                const auto effect = cliffs_delta(a, b);
                r.delta = effect.delta;
                r.category = effect.category;
                r.n_buggy = a.size();
                r.n_notbuggy = b.size();
                report.rows.push_back(std::move(r));
            };
            row("noisy", s.nb, s.nn);
            row("less_noisy", s.lb, s.ln);
        }
    }
    return report;
}

std::string report_csv(const SeparabilityReport& report) {
    std::string out = "project,metric,dataset,p_value,delta,category,n_buggy,n_notbuggy\n";
    for (const auto& r : report.rows) {
        out += csv_field(r.project) + ',' + r.metric + ',' + r.dataset + ',' + format_double(r.p_value) + ',' +
               format_double(r.delta) + ',' + std::string(to_string(r.category)) + ',' + std::to_string(r.n_buggy) +
               ',' + std::to_string(r.n_notbuggy) + '\n';
    }
    return out;
}

std::string aggregate_csv(const SeparabilityReport& report) {
    constexpr std::array<EffectCategory, 4> cats = {EffectCategory::Negligible, EffectCategory::Small,
                                                    EffectCategory::Medium, EffectCategory::Large};
    std::string out = "metric,dataset,projects,negligible_pct,small_pct,medium_pct,large_pct\n";
    for (auto metric : kMetricNames) {
        for (std::string_view dataset : {"noisy", "less_noisy"}) {
            std::array<std::size_t, 4> tally{};
            std::size_t n = 0;
            for (const auto& r : report.rows) {
                if (r.metric != metric || r.dataset != dataset) continue;
                ++tally[static_cast<std::size_t>(r.category)];
                ++n;
            }
            out += std::string(metric) + ',' + std::string(dataset) + ',' + std::to_string(n);
            for (std::size_t k = 0; k < cats.size(); ++k) {
                const double pct = n ? 100.0 * static_cast<double>(tally[k]) / static_cast<double>(n) : 0.0;
                out += ',' + format_double(pct);
            }
            out += '\n';
        }
    }
    return out;
}

json to_json(const PartitionSet& ps) {
    json counts = json::object();
    for (const auto& [project, c] : ps.per_project_counts) {
        counts[project] = {{"noisy_buggy", c.noisy_buggy},
                           {"noisy_notbuggy", c.noisy_notbuggy},
                           {"less_noisy_buggy", c.less_noisy_buggy},
                           {"less_noisy_notbuggy", c.less_noisy_notbuggy},
                           {"quarantined", c.quarantined}};
    }
    return json{{"noisy_buggy", ps.noisy_buggy},
                {"noisy_notbuggy", ps.noisy_notbuggy},
                {"less_noisy_buggy", ps.less_noisy_buggy},
                {"less_noisy_notbuggy", ps.less_noisy_notbuggy},
                {"quarantined", ps.quarantined},
                {"per_project_counts", counts},
                {"project_of", ps.project_of},
                {"verdict_queries", ps.verdict_queries}};
}

PartitionSet partition_set_from_json(const json& doc) {
    try {
        PartitionSet ps;
        ps.noisy_buggy = doc.at("noisy_buggy").get<std::set<std::string>>();
        ps.noisy_notbuggy = doc.at("noisy_notbuggy").get<std::set<std::string>>();
        ps.less_noisy_buggy = doc.at("less_noisy_buggy").get<std::set<std::string>>();
        ps.less_noisy_notbuggy = doc.at("less_noisy_notbuggy").get<std::set<std::string>>();
        ps.quarantined = doc.value("quarantined", std::set<std::string>{});
        ps.project_of = doc.value("project_of", std::map<std::string, std::string>{});
        ps.verdict_queries = doc.value("verdict_queries", std::size_t{0});
        const json per_project = doc.value("per_project_counts", json::object());
        for (const auto& [project, c] : per_project.items()) {
            auto& counts = ps.per_project_counts[project];
            counts.noisy_buggy = c.at("noisy_buggy").get<std::size_t>();
            counts.noisy_notbuggy = c.at("noisy_notbuggy").get<std::size_t>();
            counts.less_noisy_buggy = c.at("less_noisy_buggy").get<std::size_t>();
            counts.less_noisy_notbuggy = c.at("less_noisy_notbuggy").get<std::size_t>();
            counts.quarantined = c.value("quarantined", std::size_t{0});
        }
        ps.check_invariants();
        return ps;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseFailure, std::string("partition file: ") + e.what());
    } catch (const std::logic_error& e) {
        throw Error(ErrorCode::ParseFailure, std::string("partition file: ") + e.what());
    }
}

}  // namespace untangle
