#pragma once

#include "untangle/goldset.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <shared_mutex>
#include <string>
#include <vector>

namespace untangle {

struct AnnotationRecord {
    std::int64_t seq = 0;
    std::string change_id;
    std::string rater_id;
    Label label = Label::Buggy;
    std::string note;
};

// Human labels for a queue of method changes.
//
// Storage is a JSONL append log (labels.jsonl, the source of truth) plus a
// compacted snapshot (snapshot.json) of the current label per
// (change_id, rater_id). Every submission is appended and fsync'ed before
// record_annotation returns. Single writer, many readers.
class AnnotationStore {
public:
    static constexpr std::string_view kAdjudicator = "adjudicator";

    AnnotationStore(std::filesystem::path dir, std::vector<MethodChange> queue);
    ~AnnotationStore();

    AnnotationStore(const AnnotationStore&) = delete;
    AnnotationStore& operator=(const AnnotationStore&) = delete;

    // Re-submission for the same (change_id, rater_id) overwrites the current
    // label; the log keeps the history. Throws UnknownChange / InvalidLabel.
    LabeledChange record_annotation(const std::string& change_id, const std::string& rater_id, Label label,
                                    const std::string& note);
    LabeledChange record_annotation(const std::string& change_id, const std::string& rater_id,
                                    std::string_view label, const std::string& note);

    // Queue entries this rater has not labeled yet, in queue order.
    std::vector<MethodChange> pending_tasks(const std::string& rater_id, std::size_t limit) const;

    std::size_t labeled_count(const std::string& rater_id) const;
    std::size_t queue_size() const { return queue_.size(); }

    // Kappa over the changes both raters labeled, ordered by change_id.
    KappaResult kappa(const std::string& rater_a, const std::string& rater_b) const;

    std::vector<AnnotationRecord> history(const std::string& change_id, const std::string& rater_id) const;
    std::vector<AnnotationRecord> current() const;

    // Final human labels: the adjudicator's label when present, otherwise the
    // raters' label when they all agree. Disagreements without adjudication
    // are left out.
    std::vector<LabeledChange> resolved() const;

    void write_snapshot() const;

    const std::filesystem::path& directory() const { return dir_; }

private:
    void replay_log();
    void append_log(const AnnotationRecord& record);
    void write_snapshot_locked() const;

    std::filesystem::path dir_;
    std::vector<MethodChange> queue_;
    std::map<std::string, std::size_t> index_;  // change_id -> queue position
    std::map<std::pair<std::string, std::string>, AnnotationRecord> current_;
    std::vector<AnnotationRecord> log_;
    std::int64_t next_seq_ = 1;
    mutable std::size_t writes_since_snapshot_ = 0;
    mutable std::shared_mutex mutex_;
};

json to_json(const AnnotationRecord& record);

}  // namespace untangle
