#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "samodal/bridge.hpp"
#include "samodal/io.hpp"
#include "samodal/pipeline.hpp"
#include "support/scenes.hpp"

using namespace samodal;
using namespace samodal::bridge;

namespace {

std::string write_scene(const SyntheticVideo& v, const std::string& name)
{
    const auto path = std::filesystem::temp_directory_path() / ("samodal_bridge_" + name + ".json");
    std::ofstream(path) << io::to_json(v, std::nullopt).dump();
    return path.string();
}

std::string server(const std::string& flags = "") { return std::string(SAMODAL_FAKE_SERVER) + " " + flags; }

BackendSet bridged(const std::shared_ptr<BridgeClient>& c)
{
    return {std::make_shared<BridgeVisible>(c), std::make_shared<BridgeAmodal>(c), std::make_shared<BridgeTracker>(c)};
}

}  // namespace

TEST(LabelCodec, RoundTripAndRuns)
{
    LabelGrid g{{2, 3}, {0, 0, 5, 5, 5, 0}};
    EXPECT_EQ(encode_labels(g), "2 3 0 2 5 3 0 1");
    EXPECT_EQ(decode_labels("2 3 0 2 5 3 0 1"), g);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto v = generate(random_scene({}, seed));
        for (const auto& f : v.frames)
            EXPECT_EQ(decode_labels(encode_labels(f.image)), f.image);
    }
    EXPECT_THROW(decode_labels("2 3 0 2 5"), Error);
    EXPECT_THROW(decode_labels("2 3 0 2 5 3"), Error);
    EXPECT_THROW(decode_labels("2 3 0 2 5 9"), Error);
}

TEST(Bridge, PipelineOverBridgeMatchesInProcess)
{
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto v = fixtures::bridging_scene(seed);
        const auto path = write_scene(v, "match" + std::to_string(seed));
        PipelineConfig cfg;
        cfg.k = 3;
        cfg.strategy = SamplingStrategy::erosion(3);
        cfg.seed = seed;
        const auto local = run_sequence(v, make_reference_backends(v, {}, {}, {}, 0), cfg);
        auto client = std::make_shared<BridgeClient>(server(), path);
        const auto remote = run_sequence(v, bridged(client), cfg);
        EXPECT_EQ(client->shutdown(), 0);
        ASSERT_EQ(remote.frames.size(), local.frames.size());
        for (std::size_t i = 0; i < local.frames.size(); ++i)
            EXPECT_EQ(remote.frames[i], local.frames[i]) << "frame " << i + 1;
        std::ostringstream a, b;
        io::write_predictions(a, v.video_id, local.frames);
        io::write_predictions(b, v.video_id, remote.frames);
        EXPECT_EQ(a.str(), b.str());
        std::filesystem::remove(path);
    }
}

TEST(Bridge, ErrorReplyBecomesBackendErrorAtThatFrame)
{
    const auto v = generate(fixtures::walk_behind_wall_spec());
    const auto path = write_scene(v, "err");
    auto client = std::make_shared<BridgeClient>(server("--error-at 4"), path);
    try {
        run_sequence(v, bridged(client), {});
        FAIL() << "expected BackendError";
    } catch (const BackendError& e) {
        EXPECT_EQ(e.frame(), 4u);
        EXPECT_NE(std::string(e.what()).find("simulated model failure"), std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST(Bridge, VersionMismatchFailsDuringHandshake)
{
    const auto v = generate(fixtures::walk_behind_wall_spec());
    const auto path = write_scene(v, "ver");
    std::ostringstream log;
    auto client = std::make_shared<BridgeClient>(server("--version 7"), path, &log);
    EXPECT_THROW(run_sequence(v, bridged(client), {}), BackendError);
    // Nothing beyond the handshake was sent.
    EXPECT_EQ(log.str().find("predict_visible"), std::string::npos);
    std::filesystem::remove(path);
}

TEST(Bridge, MissingRoleIsReported)
{
    const auto v = generate(fixtures::walk_behind_wall_spec());
    const auto path = write_scene(v, "role");
    auto client = std::make_shared<BridgeClient>(server("--no-tracker"), path);
    try {
        run_sequence(v, bridged(client), {});
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_NE(std::string(e.what()).find("tracker"), std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST(Bridge, TranscriptAndExitStatus)
{
    const auto v = generate(fixtures::walk_behind_wall_spec());
    const auto path = write_scene(v, "log");
    std::ostringstream log;
    auto client = std::make_shared<BridgeClient>(server("--exit 3"), path, &log);
    run_sequence(v, bridged(client), {});
    EXPECT_EQ(client->shutdown(), 3);
    const auto text = log.str();
    EXPECT_EQ(text.rfind(">> {", 0), 0u);
    EXPECT_NE(text.find("\"kind\":\"init\""), std::string::npos);
    EXPECT_NE(text.find("<< {"), std::string::npos);
    EXPECT_NE(text.find("track_points"), std::string::npos);
    EXPECT_NE(text.find("\"kind\":\"shutdown\""), std::string::npos);
    // The declared instance never crosses the wire for amodal prompts.
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.find("predict_amodal") != std::string::npos) {
            EXPECT_EQ(line.find("instance"), std::string::npos);
        }
    }
    std::filesystem::remove(path);
}

TEST(Bridge, DeadServerIsABackendError)
{
    const auto v = generate(fixtures::walk_behind_wall_spec());
    auto client = std::make_shared<BridgeClient>("exit 0");
    EXPECT_THROW(run_sequence(v, bridged(client), {}), BackendError);
    auto garbage = std::make_shared<BridgeClient>("echo not-json; cat >/dev/null");
    EXPECT_THROW(run_sequence(v, bridged(garbage), {}), BackendError);
}
