#pragma once

// Engine side of the external-backend bridge: a child process speaking
// line-delimited JSON over stdin/stdout. One request, one reply, in order.
//
//   engine -> {"kind":"init","id":0,"protocol_version":1,"height":H,"width":W,"T":T,"scene":"<path>"?}
//   server -> {"kind":"reply","id":0,"protocol_version":1,
//              "capabilities":{"visible":true,"amodal":true,"tracker":true}}
//
//   engine -> {"kind":"predict_visible","id":n,"t":t,"labels":"<label runs>"}
//   server -> {"kind":"reply","id":n,"instances":[{"id":3,"score":1.0,"class":2,"mask":"<rle>"}]}
//
//   engine -> {"kind":"predict_amodal","id":n,"t":t,"labels":"<label runs>",
//              "points":[p1,...],"point_labels":[1,...]}
//   server -> {"kind":"reply","id":n,"mask":"<rle>"}
//
//   engine -> {"kind":"track_points","id":n,"t":t,"query_t":q,"instance":k,
//              "labels":"<label runs of frame t>","points":[p1,...]}
//   server -> {"kind":"reply","id":n,"points":[...],"occluded":[0,1,...]}
//
//   engine -> {"kind":"shutdown","id":n}          (no reply; server exits 0)
//
// Any request may instead be answered with {"kind":"error","id":n,"message":"..."},
// which the engine raises as a backend error at the current frame.
//
// Points are 1-based row-major pixel indices. Masks are RLE text
// "H W c0 c1 ...". Label runs are "H W v1 n1 v2 n2 ...": row-major runs of
// n_i pixels carrying label v_i (0 = background).

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

#include "samodal/backends.hpp"
#include "samodal/error.hpp"
#include "samodal/rle.hpp"

namespace samodal::bridge {

using nlohmann::json;

inline constexpr int kProtocolVersion = 1;

inline std::string encode_labels(const LabelGrid& grid)
{
    std::string out = std::to_string(grid.dims.height) + " " + std::to_string(grid.dims.width);
    std::size_t i = 0;
    while (i < grid.labels.size()) {
        std::size_t j = i;
        while (j < grid.labels.size() && grid.labels[j] == grid.labels[i])
            ++j;
        out += " " + std::to_string(grid.labels[i]) + " " + std::to_string(j - i);
        i = j;
    }
    return out;
}

inline LabelGrid decode_labels(const std::string& text)
{
    auto numbers = parse_rle(text);  // same "H W n n n ..." shape
    if (numbers.counts.size() % 2 != 0)
        throw InvalidArgument("label runs must come in (label, count) pairs");
    LabelGrid grid{numbers.dims, {}};
    for (std::size_t i = 0; i < numbers.counts.size(); i += 2) {
        const auto label = numbers.counts[i];
        const auto count = numbers.counts[i + 1];
        if (label < 0 || count < 0 || label > UINT32_MAX)
            throw InvalidArgument("bad label run");
        grid.labels.insert(grid.labels.end(), static_cast<std::size_t>(count), static_cast<std::uint32_t>(label));
        if (grid.labels.size() > grid.dims.size())
            throw InvalidArgument("label runs exceed the grid");
    }
    if (grid.labels.size() != grid.dims.size())
        throw InvalidArgument("label runs do not cover the grid");
    return grid;
}

/// Child process with line-oriented pipes to its stdin and stdout.
class Subprocess
{
public:
    /// Runs `command` through /bin/sh -c. SIGPIPE is ignored process-wide so
    /// a dead child surfaces as a write error instead of killing the engine.
    explicit Subprocess(const std::string& command)
    {
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2];
        int from_child[2];
        if (pipe(to_child) != 0)
            throw Error("bridge: pipe() failed");
        if (pipe(from_child) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            throw Error("bridge: pipe() failed");
        }
        pid_ = fork();
        if (pid_ < 0)
            throw Error("bridge: fork() failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        in_ = fdopen(to_child[1], "w");
        out_ = fdopen(from_child[0], "r");
        if (!in_ || !out_)
            throw Error("bridge: fdopen() failed");
    }

    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;

    ~Subprocess()
    {
        close_input();
        if (out_)
            fclose(out_);
        wait();
    }

    bool write_line(const std::string& line)
    {
        if (!in_)
            return false;
        if (fputs(line.c_str(), in_) < 0 || fputc('\n', in_) == EOF || fflush(in_) != 0)
            return false;
        return true;
    }

    std::optional<std::string> read_line()
    {
        if (!out_)
            return std::nullopt;
        std::string line;
        int c;
        while ((c = fgetc(out_)) != EOF) {
            if (c == '\n')
                return line;
            line.push_back(static_cast<char>(c));
        }
        if (line.empty())
            return std::nullopt;
        return line;
    }

    void close_input()
    {
        if (in_) {
            fclose(in_);
            in_ = nullptr;
        }
    }

    /// Exit status of the child (-1 if it did not exit normally).
    int wait()
    {
        if (pid_ <= 0)
            return status_;
        int status = 0;
        if (waitpid(pid_, &status, 0) == pid_)
            status_ = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        pid_ = -1;
        return status_;
    }

private:
    pid_t pid_ = -1;
    FILE* in_ = nullptr;
    FILE* out_ = nullptr;
    int status_ = -1;
};

struct Capabilities
{
    bool visible = false;
    bool amodal = false;
    bool tracker = false;
};

/// Request/reply client shared by the three bridge backend roles.
class BridgeClient
{
public:
    /// `scene_path` is forwarded in init so dummy servers can answer from
    /// ground truth; real model servers ignore it. `transcript`, if set,
    /// receives every line sent (">> ") and received ("<< ").
    explicit BridgeClient(std::string command, std::optional<std::string> scene_path = std::nullopt,
                          std::ostream* transcript = nullptr)
        : command_(std::move(command)), scene_path_(std::move(scene_path)), transcript_(transcript)
    {
    }

    ~BridgeClient()
    {
        try {
            shutdown();
        } catch (...) {
        }
    }

    /// Spawns the server and performs the handshake once; later calls with
    /// the same geometry are no-ops.
    void begin_video(const GridDims& dims, int frames)
    {
        if (process_ && dims == dims_ && frames == frames_)
            return;
        if (process_)
            shutdown();
        process_ = std::make_unique<Subprocess>(command_);
        dims_ = dims;
        frames_ = frames;
        json init{{"kind", "init"},
                  {"protocol_version", kProtocolVersion},
                  {"height", dims.height},
                  {"width", dims.width},
                  {"T", frames}};
        if (scene_path_)
            init["scene"] = *scene_path_;
        const auto reply = request(0, std::move(init));
        if (reply.value("protocol_version", -1) != kProtocolVersion)
            throw BackendError(0, "bridge: server speaks protocol version " +
                                      std::to_string(reply.value("protocol_version", -1)) + ", engine speaks " +
                                      std::to_string(kProtocolVersion));
        const auto caps = reply.value("capabilities", json::object());
        capabilities_ = {caps.value("visible", false), caps.value("amodal", false), caps.value("tracker", false)};
    }

    const Capabilities& capabilities() const noexcept { return capabilities_; }

    /// Send one request and return its reply payload. Error replies and
    /// protocol violations raise BackendError tagged with `frame`.
    json request(FrameIndex frame, json message)
    {
        if (!process_)
            throw BackendError(static_cast<std::size_t>(frame), "bridge: not started");
        const auto id = next_id_++;
        message["id"] = id;
        const auto line = message.dump();
        if (transcript_)
            *transcript_ << ">> " << line << '\n';
        if (!process_->write_line(line))
            throw BackendError(static_cast<std::size_t>(frame), "bridge: server closed its input");
        const auto answer = process_->read_line();
        if (!answer)
            throw BackendError(static_cast<std::size_t>(frame), "bridge: server closed its output");
        if (transcript_)
            *transcript_ << "<< " << *answer << '\n';
        json reply;
        try {
            reply = json::parse(*answer);
        } catch (const json::exception&) {
            throw BackendError(static_cast<std::size_t>(frame), "bridge: unparseable reply");
        }
        if (reply.value("id", -1) != id)
            throw BackendError(static_cast<std::size_t>(frame), "bridge: reply id mismatch");
        const auto kind = reply.value("kind", std::string());
        if (kind == "error")
            throw BackendError(static_cast<std::size_t>(frame), "bridge: " + reply.value("message", std::string("error")));
        if (kind != "reply")
            throw BackendError(static_cast<std::size_t>(frame), "bridge: unexpected message kind \"" + kind + "\"");
        return reply;
    }

    /// Sends shutdown and waits for the server. Returns its exit status.
    int shutdown()
    {
        if (!process_)
            return exit_status_;
        const json msg{{"kind", "shutdown"}, {"id", next_id_++}};
        const auto line = msg.dump();
        if (transcript_)
            *transcript_ << ">> " << line << '\n';
        process_->write_line(line);
        process_->close_input();
        exit_status_ = process_->wait();
        process_.reset();
        return exit_status_;
    }

    void require(bool capability, const char* role) const
    {
        if (!capability)
            throw BackendError(0, std::string("bridge: server does not provide the ") + role + " role");
    }

private:
    std::string command_;
    std::optional<std::string> scene_path_;
    std::ostream* transcript_;
    std::unique_ptr<Subprocess> process_;
    GridDims dims_;
    int frames_ = 0;
    std::int64_t next_id_ = 0;
    Capabilities capabilities_;
    int exit_status_ = -1;
};

class BridgeVisible : public VisibleSegmenter
{
public:
    explicit BridgeVisible(std::shared_ptr<BridgeClient> client) : client_(std::move(client)) {}

    void begin_video(const GridDims& dims, int frames) override
    {
        client_->begin_video(dims, frames);
        client_->require(client_->capabilities().visible, "visible");
    }

    std::vector<VisiblePrediction> predict(FrameIndex t, const LabelGrid& frame) override
    {
        const auto reply =
            client_->request(t, {{"kind", "predict_visible"}, {"t", t}, {"labels", encode_labels(frame)}});
        std::vector<VisiblePrediction> out;
        try {
            for (const auto& inst : reply.at("instances")) {
                VisiblePrediction p;
                p.id = InstanceId{inst.at("id").get<std::uint32_t>()};
                p.mask = mask_from_text(inst.at("mask").get<std::string>());
                p.score = inst.value("score", 1.0);
                if (inst.contains("class") && !inst.at("class").is_null())
                    p.class_label = inst.at("class").get<int>();
                out.push_back(std::move(p));
            }
        } catch (const std::exception& e) {
            throw BackendError(static_cast<std::size_t>(t), std::string("bridge: bad predict_visible reply: ") + e.what());
        }
        return out;
    }

private:
    std::shared_ptr<BridgeClient> client_;
};

class BridgeAmodal : public AmodalSegmenter
{
public:
    explicit BridgeAmodal(std::shared_ptr<BridgeClient> client) : client_(std::move(client)) {}

    void begin_video(const GridDims& dims, int frames) override
    {
        client_->begin_video(dims, frames);
        client_->require(client_->capabilities().amodal, "amodal");
    }

    /// The declared id never crosses the wire.
    BinaryMask predict(FrameIndex t, const LabelGrid& frame, const PointTuple& prompt,
                       std::optional<InstanceId>) override
    {
        json points = json::array();
        for (auto p : prompt.points)
            points.push_back(p.value);
        const auto reply = client_->request(t, {{"kind", "predict_amodal"},
                                                {"t", t},
                                                {"labels", encode_labels(frame)},
                                                {"points", points},
                                                {"point_labels", prompt.labels}});
        try {
            return mask_from_text(reply.at("mask").get<std::string>());
        } catch (const std::exception& e) {
            throw BackendError(static_cast<std::size_t>(t), std::string("bridge: bad predict_amodal reply: ") + e.what());
        }
    }

private:
    std::shared_ptr<BridgeClient> client_;
};

class BridgeTracker : public PointTracker
{
public:
    explicit BridgeTracker(std::shared_ptr<BridgeClient> client) : client_(std::move(client)) {}

    void begin_video(const GridDims& dims, int frames) override
    {
        dims_ = dims;
        client_->begin_video(dims, frames);
        client_->require(client_->capabilities().tracker, "tracker");
    }

    TrackResult track(FrameIndex t, std::span<const LabelGrid> history, FrameIndex query_frame,
                      std::span<const PixelIndex> query, InstanceId owner) override
    {
        if (static_cast<int>(history.size()) < t)
            throw InvalidArgument("tracker history shorter than the current frame");
        json points = json::array();
        for (auto p : query)
            points.push_back(p.value);
        const auto reply = client_->request(t, {{"kind", "track_points"},
                                                {"t", t},
                                                {"query_t", query_frame},
                                                {"instance", owner.value},
                                                {"labels", encode_labels(history[static_cast<std::size_t>(t - 1)])},
                                                {"points", points}});
        TrackResult out;
        try {
            for (const auto& p : reply.at("points")) {
                const auto v = p.get<std::int64_t>();
                // Clamp whatever the server sends back onto the grid.
                const auto clamped = std::clamp<std::int64_t>(v, 1, static_cast<std::int64_t>(dims_.size()));
                out.points.push_back({static_cast<std::size_t>(clamped)});
                out.clipped.push_back(clamped != v);
            }
            for (const auto& o : reply.at("occluded"))
                out.occluded.push_back(o.get<int>() != 0);
        } catch (const std::exception& e) {
            throw BackendError(static_cast<std::size_t>(t), std::string("bridge: bad track_points reply: ") + e.what());
        }
        return out;
    }

private:
    std::shared_ptr<BridgeClient> client_;
    GridDims dims_;
};

}  // namespace samodal::bridge
