#include "untangle/annotation_store.hpp"

#include "untangle/error.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <mutex>

namespace untangle {

namespace {

constexpr std::size_t kSnapshotEvery = 50;

AnnotationRecord record_from_json(const json& row) {
    AnnotationRecord r;
    r.seq = row.at("seq").get<std::int64_t>();
    r.change_id = row.at("change_id").get<std::string>();
    r.rater_id = row.at("rater_id").get<std::string>();
    const auto label = parse_label(row.at("label").get<std::string>());
    if (!label || *label == Label::Unparseable) throw Error(ErrorCode::InvalidLabel, "bad label in annotation log");
    r.label = *label;
    r.note = row.value("note", "");
    return r;
}

}  // namespace

json to_json(const AnnotationRecord& r) {
    return json{{"seq", r.seq},
                {"change_id", r.change_id},
                {"rater_id", r.rater_id},
                {"label", std::string(to_string(r.label))},
                {"note", r.note}};
}

AnnotationStore::AnnotationStore(std::filesystem::path dir, std::vector<MethodChange> queue)
    : dir_(std::move(dir)), queue_(std::move(queue)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir_.string() + ": " + ec.message());
    for (std::size_t i = 0; i < queue_.size(); ++i) index_.emplace(queue_[i].change_id, i);
    replay_log();
}

AnnotationStore::~AnnotationStore() {
    try {
        write_snapshot();
    } catch (...) {
    }
}

void AnnotationStore::replay_log() {
    const auto path = dir_ / "labels.jsonl";
    if (!std::filesystem::exists(path)) return;
    for (const auto& row : read_jsonl(path)) {
        AnnotationRecord r = record_from_json(row);
        next_seq_ = std::max(next_seq_, r.seq + 1);
        current_[{r.change_id, r.rater_id}] = r;
        log_.push_back(std::move(r));
    }
}

void AnnotationStore::append_log(const AnnotationRecord& record) {
    const auto path = dir_ / "labels.jsonl";
    const std::string line = to_json(record).dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
        if (n <= 0) {
            ::close(fd);
            throw Error(ErrorCode::IoFailure, "append to " + path.string() + " failed");
        }
        written += static_cast<std::size_t>(n);
    }
    const int rc = ::fsync(fd);
    ::close(fd);
    if (rc != 0) throw Error(ErrorCode::IoFailure, "fsync " + path.string() + " failed");
}

LabeledChange AnnotationStore::record_annotation(const std::string& change_id, const std::string& rater_id,
                                                 Label label, const std::string& note) {
    if (label == Label::Unparseable) throw Error(ErrorCode::InvalidLabel, "label must be Buggy or NotBuggy");
    if (rater_id.empty()) throw Error(ErrorCode::InvalidArgument, "rater_id is required");
    std::unique_lock lock(mutex_);
    const auto it = index_.find(change_id);
    if (it == index_.end()) throw Error(ErrorCode::UnknownChange, "no queued change " + change_id);

    AnnotationRecord record{next_seq_, change_id, rater_id, label, note};
    append_log(record);
    ++next_seq_;
    current_[{change_id, rater_id}] = record;
    log_.push_back(record);
    if (++writes_since_snapshot_ >= kSnapshotEvery) write_snapshot_locked();

    LabeledChange out;
    out.change = queue_[it->second];
    out.label = label;
    out.label_source = LabelSource::HumanRater;
    out.rater_id = rater_id;
    if (!note.empty()) out.note = note;
    return out;
}

LabeledChange AnnotationStore::record_annotation(const std::string& change_id, const std::string& rater_id,
                                                 std::string_view label, const std::string& note) {
    const auto parsed = parse_label(label);
    if (!parsed || *parsed == Label::Unparseable)
        throw Error(ErrorCode::InvalidLabel, "label must be Buggy or NotBuggy, got '" + std::string(label) + "'");
    return record_annotation(change_id, rater_id, *parsed, note);
}

std::vector<MethodChange> AnnotationStore::pending_tasks(const std::string& rater_id, std::size_t limit) const {
    std::shared_lock lock(mutex_);
    std::vector<MethodChange> out;
    for (const auto& c : queue_) {
        if (out.size() >= limit) break;
        if (!current_.contains({c.change_id, rater_id})) out.push_back(c);
    }
    return out;
}

std::size_t AnnotationStore::labeled_count(const std::string& rater_id) const {
    std::shared_lock lock(mutex_);
    return static_cast<std::size_t>(std::count_if(current_.begin(), current_.end(),
                                                  [&](const auto& kv) { return kv.first.second == rater_id; }));
}

KappaResult AnnotationStore::kappa(const std::string& rater_a, const std::string& rater_b) const {
    std::shared_lock lock(mutex_);
    std::map<std::string, Label> a;
    std::map<std::string, Label> b;
    for (const auto& [key, rec] : current_) {
        if (key.second == rater_a) a[key.first] = rec.label;
        if (key.second == rater_b) b[key.first] = rec.label;
    }
    std::vector<Label> la;
    std::vector<Label> lb;
    for (const auto& [id, label] : a) {
        auto it = b.find(id);
        if (it == b.end()) continue;
        la.push_back(label);
        lb.push_back(it->second);
    }
    return cohens_kappa(la, lb);
}

std::vector<AnnotationRecord> AnnotationStore::history(const std::string& change_id, const std::string& rater_id) const {
    std::shared_lock lock(mutex_);
    std::vector<AnnotationRecord> out;
    for (const auto& r : log_)
        if (r.change_id == change_id && r.rater_id == rater_id) out.push_back(r);
    return out;
}

std::vector<AnnotationRecord> AnnotationStore::current() const {
    std::shared_lock lock(mutex_);
    std::vector<AnnotationRecord> out;
    for (const auto& [_, r] : current_) out.push_back(r);
    return out;
}

std::vector<LabeledChange> AnnotationStore::resolved() const {
    std::shared_lock lock(mutex_);
    std::map<std::string, std::vector<const AnnotationRecord*>> by_change;
    for (const auto& [key, rec] : current_) by_change[key.first].push_back(&rec);

    std::vector<LabeledChange> out;
    for (const auto& [change_id, records] : by_change) {
        const AnnotationRecord* decided = nullptr;
        for (const auto* r : records)
            if (r->rater_id == kAdjudicator) decided = r;
        if (!decided) {
            const bool unanimous = std::all_of(records.begin(), records.end(),
                                               [&](const auto* r) { return r->label == records.front()->label; });
            if (!unanimous) continue;
            decided = records.front();
        }
        LabeledChange lc;
        lc.change = queue_[index_.at(change_id)];
        lc.label = decided->label;
        lc.label_source = LabelSource::HumanRater;
        lc.rater_id = decided->rater_id;
        if (!decided->note.empty()) lc.note = decided->note;
        out.push_back(std::move(lc));
    }
    return out;
}

void AnnotationStore::write_snapshot() const {
    std::unique_lock lock(mutex_);
    write_snapshot_locked();
}

void AnnotationStore::write_snapshot_locked() const {
    json records = json::array();
    for (const auto& [_, r] : current_) records.push_back(to_json(r));
    json snap{{"next_seq", next_seq_}, {"records", std::move(records)}};
    write_file(dir_ / "snapshot.json", snap.dump(2) + "\n");
    writes_since_snapshot_ = 0;
}

}  // namespace untangle
