#include "lithoquery/error.hpp"
#include "lithoquery/service/config.hpp"
#include "lithoquery/service/jobs.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cstdlib>

namespace svc = lithoquery::service;
using lithoquery::Error;
using lithoquery::ErrorCode;

TEST(Config, DefaultsMatchDocumentation) {
    svc::ServiceConfig c;
    EXPECT_EQ(c.default_provider, "reference");
    EXPECT_EQ(c.embed_batch_size, 64u);
    EXPECT_EQ(c.default_tau, 0.2);
    EXPECT_EQ(c.default_r1, 500.0);
    EXPECT_EQ(c.default_r2, 500.0);
    EXPECT_EQ(c.albers.standard_parallel_1, 29.5);
    EXPECT_EQ(c.albers.central_meridian, -96.0);
    EXPECT_EQ(c.port, 8080);
}

TEST(Config, SetParsesAndRejects) {
    svc::ServiceConfig c;
    c.set("default_tau", "0.35");
    c.set("albers.radius", "6371000");
    c.set("port", "9001");
    c.set("provider.mini.endpoint", "http://127.0.0.1:9000");
    c.set("provider.mini.dims", "384");
    EXPECT_EQ(c.default_tau, 0.35);
    EXPECT_EQ(c.albers.radius, 6371000.0);
    EXPECT_EQ(c.port, 9001);
    EXPECT_EQ(c.providers.at("mini").dims, 384u);
    for (auto [k, v] : {std::pair{"no_such_key", "1"}, {"port", "eighty"}, {"default_tau", "1.5"}}) {
        try {
            c.set(k, v);
            FAIL() << k;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::config);
        }
    }
}

TEST(Config, EnvNames) {
    EXPECT_EQ(svc::env_name("data_dir"), "LITHOQUERY_DATA_DIR");
    EXPECT_EQ(svc::env_name("albers.radius"), "LITHOQUERY_ALBERS__RADIUS");
}

TEST(Config, FileThenEnvironment) {
    lqtest::TempDir dir;
    lqtest::write_file(dir / "lq.conf", "# comment\ndata_dir = /tmp/x\ndefault_r1 = 250\nembed_batch_size=16\n");
    ::setenv("LITHOQUERY_DEFAULT_R1", "125", 1);
    const auto c = svc::load_config(dir / "lq.conf");
    ::unsetenv("LITHOQUERY_DEFAULT_R1");
    EXPECT_EQ(c.data_dir, "/tmp/x");
    EXPECT_EQ(c.default_r1, 125.0);
    EXPECT_EQ(c.embed_batch_size, 16u);
}

TEST(Config, MalformedFileLineIsConfigError) {
    lqtest::TempDir dir;
    lqtest::write_file(dir / "lq.conf", "data_dir /tmp/x\n");
    try {
        svc::load_config(dir / "lq.conf");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::config);
    }
}

TEST(Config, EveryDocumentedKeyIsSettable) {
    EXPECT_GE(svc::documented_keys().size(), 15u);
    for (const auto& k : svc::documented_keys()) EXPECT_NE(svc::env_name(k).find("LITHOQUERY_"), std::string::npos);
}

TEST(Jobs, RunsToCompletionWithProgress) {
    lqtest::TempDir dir;
    svc::JobRunner runner(dir.path(), 2);
    const auto id = runner.submit("demo", "p1", [](const svc::JobRunner::Progress& progress) {
        progress(0.5);
        return svc::JobOutcome{"ref-1", {{"answer", 42}}};
    });
    const auto rec = runner.wait(id);
    EXPECT_EQ(rec.status, svc::JobStatus::done);
    EXPECT_EQ(rec.progress, 1.0);
    EXPECT_EQ(rec.result_ref, "ref-1");
    EXPECT_EQ(rec.result["answer"], 42);
    EXPECT_TRUE(std::filesystem::exists(dir / (id + ".json")));
}

TEST(Jobs, FailureKeepsErrorCode) {
    lqtest::TempDir dir;
    svc::JobRunner runner(dir.path(), 1);
    const auto id = runner.submit("demo", "p1", [](const auto&) -> svc::JobOutcome {
        throw Error(ErrorCode::ingest, "feature 3: bad ring");
    });
    const auto rec = runner.wait(id);
    EXPECT_EQ(rec.status, svc::JobStatus::failed);
    EXPECT_EQ(rec.error_code, "ingest_error");
    EXPECT_NE(rec.error_message.find("feature 3"), std::string::npos);
}

TEST(Jobs, RecordsSurviveRestart) {
    lqtest::TempDir dir;
    std::string done_id;
    {
        svc::JobRunner runner(dir.path(), 1);
        done_id = runner.submit("demo", "p", [](const auto&) { return svc::JobOutcome{"r", {}}; });
        runner.wait(done_id);
    }
    svc::JobRecord interrupted;
    interrupted.job_id = "job-interrupted";
    interrupted.kind = "gridsearch";
    interrupted.status = svc::JobStatus::running;
    lqtest::write_file(dir / "job-interrupted.json", interrupted.to_json().dump());

    svc::JobRunner again(dir.path(), 1);
    EXPECT_EQ(again.get(done_id)->status, svc::JobStatus::done);
    EXPECT_EQ(again.get(done_id)->result_ref, "r");
    EXPECT_EQ(again.get("job-interrupted")->status, svc::JobStatus::failed);
    EXPECT_FALSE(again.get("job-missing").has_value());
}

TEST(Jobs, ManyConcurrentJobs) {
    lqtest::TempDir dir;
    svc::JobRunner runner(dir.path(), 3);
    std::vector<std::string> ids;
    for (int i = 0; i < 20; ++i)
        ids.push_back(runner.submit("n", "p", [i](const auto&) { return svc::JobOutcome{std::to_string(i), {}}; }));
    std::set<std::string> unique(ids.begin(), ids.end());
    EXPECT_EQ(unique.size(), ids.size());
    for (int i = 0; i < 20; ++i) EXPECT_EQ(runner.wait(ids[i]).result_ref, std::to_string(i));
}
