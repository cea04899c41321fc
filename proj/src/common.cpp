#include "untangle/error.hpp"
#include "untangle/hashing.hpp"
#include "untangle/io.hpp"
#include "untangle/label.hpp"
#include "untangle/process.hpp"
#include "untangle/rng.hpp"

#include <openssl/evp.h>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

namespace untangle {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::RepoNotFound: return "RepoNotFound";
        case ErrorCode::CorruptObject: return "CorruptObject";
        case ErrorCode::UnparsableFile: return "UnparsableFile";
        case ErrorCode::NoChange: return "NoChange";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::UnknownChange: return "UnknownChange";
        case ErrorCode::InvalidLabel: return "InvalidLabel";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::MissingExamples: return "MissingExamples";
        case ErrorCode::MissingMessage: return "MissingMessage";
        case ErrorCode::PromptTooLarge: return "PromptTooLarge";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::AuthFailure: return "AuthFailure";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::DegenerateClass: return "DegenerateClass";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::ParseFailure: return "ParseFailure";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::MissingMetrics: return "MissingMetrics";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::EmptyInput:
        case ErrorCode::LengthMismatch:
        case ErrorCode::InvalidLabel:
        case ErrorCode::MissingExamples:
        case ErrorCode::MissingMessage:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::DegenerateClass:
        case ErrorCode::OutOfRange:
        case ErrorCode::MissingMetrics:
        case ErrorCode::InvalidArgument:
        case ErrorCode::RepoNotFound:
        case ErrorCode::ParseFailure:
        case ErrorCode::UnknownChange:
            return true;
        default:
            return false;
    }
}

std::string_view to_string(Label label) noexcept {
    switch (label) {
        case Label::Buggy: return "Buggy";
        case Label::NotBuggy: return "NotBuggy";
        case Label::Unparseable: return "Unparseable";
    }
    return "Unparseable";
}

std::optional<Label> parse_label(std::string_view text) noexcept {
    const std::string lowered = to_lower(text);
    if (lowered == "buggy") return Label::Buggy;
    if (lowered == "notbuggy") return Label::NotBuggy;
    if (lowered == "unparseable") return Label::Unparseable;
    return std::nullopt;
}

double Rng::normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// hashing

namespace {

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};

std::string hex(const unsigned char* data, unsigned len) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (unsigned i = 0; i < len; ++i) {
        out[2 * i] = kDigits[data[i] >> 4];
        out[2 * i + 1] = kDigits[data[i] & 0xf];
    }
    return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    return hex(digest.data(), len);
}

std::string sha256_file_hex(const std::string& path) { return sha256_hex(read_file(path)); }

// ---------------------------------------------------------------------------
// io

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::IoFailure, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "rename to " + path.string() + ": " + ec.message());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::vector<json> rows;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        ++line_no;
        const std::string_view line(text.data() + pos, end - pos);
        if (!trim(line).empty()) {
            try {
                rows.push_back(json::parse(line));
            } catch (const json::parse_error& e) {
                throw Error(ErrorCode::ParseFailure,
                            path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        pos = end + 1;
    }
    return rows;
}

std::string to_jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& row : rows) {
        out += row.dump(-1, ' ', false, json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

std::string csv_field(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        any = true;
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field += c;
        }
    }
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string trim(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) return std::to_string(value);
    return std::string(buf.data(), ptr);
}

// ---------------------------------------------------------------------------
// process

ProcessResult run_process(const std::vector<std::string>& argv) {
    if (argv.empty()) throw Error(ErrorCode::InvalidArgument, "empty argv");
    int out_pipe[2];
    int err_pipe[2];
    if (pipe(out_pipe) != 0) throw Error(ErrorCode::IoFailure, "pipe failed");
    if (pipe(err_pipe) != 0) {
        close(out_pipe[0]);
        close(out_pipe[1]);
        throw Error(ErrorCode::IoFailure, "pipe failed");
    }

    std::vector<char*> cargs;
    cargs.reserve(argv.size() + 1);
    for (const auto& a : argv) cargs.push_back(const_cast<char*>(a.c_str()));
    cargs.push_back(nullptr);

    const pid_t pid = fork();
    if (pid < 0) throw Error(ErrorCode::IoFailure, "fork failed");
    if (pid == 0) {
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        const int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) dup2(devnull, STDIN_FILENO);
        execvp(cargs[0], cargs.data());
        _exit(127);
    }
    close(out_pipe[1]);
    close(err_pipe[1]);

    ProcessResult result;
    std::array<pollfd, 2> fds{{{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}}};
    std::array<char, 65536> buf{};
    int open_fds = 2;
    while (open_fds > 0) {
        if (poll(fds.data(), fds.size(), -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (std::size_t i = 0; i < fds.size(); ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const ssize_t n = read(fds[i].fd, buf.data(), buf.size());
            if (n > 0) {
                (i == 0 ? result.out : result.err).append(buf.data(), static_cast<std::size_t>(n));
            } else {
                close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

}  // namespace untangle
