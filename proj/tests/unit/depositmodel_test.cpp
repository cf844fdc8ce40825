#include "lithoquery/depositmodel.hpp"
#include "lithoquery/io.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

namespace dm = lithoquery::depositmodel;
using lithoquery::Error;
using lithoquery::ErrorCode;

namespace {

const std::filesystem::path kSkarn = std::filesystem::path(LQ_ASSET_DIR) / "deposit-models" / "tungsten-skarn.json";

dm::DepositModel skarn() { return dm::parse_model(lithoquery::io::read_text(kSkarn), kSkarn.string()); }

std::string canned_completion(const dm::DepositModel& m) {
    std::string out;
    for (const auto& [h, v] : m.characteristics) out += h + ": " + v + "\n";
    return out;
}

class CannedLlm : public dm::LlmProvider {
public:
    explicit CannedLlm(std::string reply) : reply_(std::move(reply)) {}
    std::string complete(const std::string& prompt) override {
        ++calls;
        last_prompt = prompt;
        return reply_;
    }
    int calls = 0;
    std::string last_prompt;

private:
    std::string reply_;
};

class FailingLlm : public dm::LlmProvider {
public:
    std::string complete(const std::string&) override { throw std::runtime_error("connection refused"); }
};

bool has_kind(const std::vector<dm::Diagnostic>& d, dm::DiagnosticKind k, const std::string& heading) {
    for (const auto& x : d)
        if (x.kind == k && x.heading == heading) return true;
    return false;
}

}  // namespace

TEST(DepositModel, ShippedSkarnModelIsComplete) {
    const auto m = skarn();
    EXPECT_EQ(m.deposit_type, "tungsten skarn");
    ASSERT_EQ(m.characteristics.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(m.characteristics[i].first, dm::canonical_headings()[i]);
    EXPECT_TRUE(dm::validate_model(m).empty());
    EXPECT_EQ(m.characteristic("Rock types")->rfind("Pure and impure limestones", 0), 0u);
}

TEST(DepositModel, CanonicalHeadingLookupIgnoresCase) {
    EXPECT_EQ(dm::canonical_heading("rock TYPES"), "Rock types");
    EXPECT_FALSE(dm::canonical_heading("Geophysics").has_value());
    EXPECT_EQ(dm::slug("Tungsten Skarn"), "tungsten-skarn");
}

TEST(ValidateModel, EmptyValueGivesOneDiagnostic) {
    auto m = skarn();
    for (auto& [h, v] : m.characteristics)
        if (h == "Textures") v.clear();
    const auto d = dm::validate_model(m);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].kind, dm::DiagnosticKind::empty_value);
    EXPECT_EQ(d[0].heading, "Textures");
}

TEST(ValidateModel, OverLengthValue) {
    auto m = skarn();
    m.characteristics[2].second = std::string(3000, 'x');
    EXPECT_TRUE(has_kind(dm::validate_model(m), dm::DiagnosticKind::over_length, "Description"));
    m.characteristics[2].second = std::string(2000, 'x');
    EXPECT_TRUE(dm::validate_model(m).empty());
}

TEST(ValidateModel, MissingAndExtraHeadings) {
    auto m = skarn();
    m.characteristics.pop_back();
    m.characteristics.emplace_back("Geophysics", "magnetic lows");
    const auto d = dm::validate_model(m);
    EXPECT_TRUE(has_kind(d, dm::DiagnosticKind::missing_heading, "Ore controls"));
    EXPECT_TRUE(has_kind(d, dm::DiagnosticKind::extra_heading, "Geophysics"));
}

TEST(ParseModel, DuplicateHeadingIsRejected) {
    try {
        dm::parse_model(R"({"deposit_type":"x","characteristics":{"Synonyms":"a","Synonyms":"b"}})", "dup.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::parse);
        EXPECT_NE(std::string(e.what()).find("dup.json"), std::string::npos);
    }
}

TEST(LoadModels, CompleteFileHasNoWarnings) {
    const auto rep = dm::load_models(kSkarn);
    ASSERT_EQ(rep.models.size(), 1u);
    EXPECT_TRUE(rep.warnings.empty());
    EXPECT_TRUE(rep.rejected.empty());
}

TEST(LoadModels, DirectoryReportsWarningsAndRejections) {
    lqtest::TempDir dir;
    auto m = skarn();
    m.characteristics.pop_back();  // drops Ore controls
    dm::save_model(dir / "a.json", m);
    lqtest::write_file(dir / "b.json", R"({"deposit_type":"y","characteristics":{"Synonyms":"a","Synonyms":"b"}})");
    lqtest::write_file(dir / "c.json", "not json");
    lqtest::write_file(dir / "notes.txt", "ignored");
    const auto rep = dm::load_models(dir.path());
    ASSERT_EQ(rep.models.size(), 1u);
    ASSERT_EQ(rep.warnings.size(), 1u);
    EXPECT_TRUE(has_kind(rep.warnings[0].second, dm::DiagnosticKind::missing_heading, "Ore controls"));
    EXPECT_EQ(rep.rejected.size(), 2u);
}

TEST(LoadModels, NothingValidIsIngestError) {
    lqtest::TempDir dir;
    lqtest::write_file(dir / "c.json", "{}");
    try {
        dm::load_models(dir.path());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ingest);
    }
}

TEST(LoadModels, SaveThenLoadRoundTrips) {
    lqtest::TempDir dir;
    auto m = skarn();
    m.characteristics.emplace_back("Geochemistry", "W, Mo, Bi anomalies");
    m.edited = true;
    dm::save_model(dir / "m.json", m);
    const auto back = dm::load_models(dir / "m.json").models.at(0);
    EXPECT_EQ(back, m);
}

TEST(ModelStore, EditKeepsPreviousVersionAndSeedsStayUntouched) {
    lqtest::TempDir dir;
    const auto seed_text = lithoquery::io::read_text(kSkarn);
    dm::ModelStore store(dir / "store", {kSkarn.parent_path()});
    ASSERT_TRUE(store.get("tungsten skarn").has_value());
    EXPECT_FALSE(store.get("tungsten skarn")->edited);
    EXPECT_EQ(store.list(), (std::vector<std::string>{"tungsten skarn"}));

    auto m = *store.get("tungsten skarn");
    m.characteristics[1].second = "W";
    const auto stored = store.put(m);
    EXPECT_TRUE(stored.edited);
    EXPECT_EQ(store.get("tungsten skarn")->characteristics[1].second, "W");
    EXPECT_EQ(store.versions("tungsten skarn").size(), 1u);
    const auto previous = dm::parse_model(lithoquery::io::read_text(store.versions("tungsten skarn")[0]));
    EXPECT_EQ(previous.characteristics[1].second, "W, Mo, Cu, Sn, Zn");

    m.characteristics[1].second = "W, Mo";
    store.put(m);
    EXPECT_EQ(store.versions("tungsten skarn").size(), 2u);
    EXPECT_EQ(lithoquery::io::read_text(kSkarn), seed_text);
}

TEST(Template, InstantiatesAllPlaceholders) {
    const auto prompt = dm::instantiate_template(dm::default_prompt_template(), "tungsten skarn", "DOC {{document}}");
    EXPECT_NE(prompt.find("tungsten skarn"), std::string::npos);
    EXPECT_NE(prompt.find("DOC {{document}}"), std::string::npos);
    EXPECT_NE(prompt.find("Ore controls"), std::string::npos);
    EXPECT_EQ(prompt.find("{{deposit_type}}"), std::string::npos);
    EXPECT_THROW(dm::instantiate_template("no placeholders", "x", "y"), Error);
}

TEST(ParseCompletion, HeadingsContinuationsAndMarkup) {
    const auto c = dm::parse_completion(
        "Here is the model.\n\n**Synonyms:** none\n- Commodities: W, Mo\n  and Cu\nrock types: limestone\n"
        "Geophysics: magnetic lows\n");
    ASSERT_EQ(c.size(), 4u);
    EXPECT_EQ(c[0], (dm::Characteristic{"Synonyms", "none"}));
    EXPECT_EQ(c[1], (dm::Characteristic{"Commodities", "W, Mo and Cu"}));
    EXPECT_EQ(c[2].first, "Rock types");
    EXPECT_EQ(c[3], (dm::Characteristic{"Geophysics", "magnetic lows"}));
}

TEST(ParseCompletion, NoHeadingsRaisesWithCompletionAttached) {
    try {
        dm::parse_completion("I cannot help with that.");
        FAIL();
    } catch (const dm::CompletionParseError& e) {
        EXPECT_EQ(e.completion(), "I cannot help with that.");
        EXPECT_EQ(e.code(), ErrorCode::parse);
    }
    EXPECT_THROW(dm::parse_completion("Synonyms: a\nSynonyms: b\n"), dm::CompletionParseError);
}

TEST(Summarize, CannedCompletionRoundTrips) {
    const auto truth = skarn();
    CannedLlm llm(canned_completion(truth));
    const auto r = dm::summarize_document("A long document about tungsten skarns.", "tungsten skarn", llm);
    EXPECT_EQ(llm.calls, 1);
    EXPECT_NE(llm.last_prompt.find("A long document about tungsten skarns."), std::string::npos);
    ASSERT_EQ(r.model.characteristics.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(r.model.characteristics[i].first, dm::canonical_headings()[i]);
        EXPECT_EQ(r.model.characteristics[i].second, truth.characteristics[i].second);
    }
    EXPECT_NE(r.model.characteristic("Rock types")->find("tonalite, granodiorite, quartz monzonite"), std::string::npos);
    EXPECT_TRUE(r.diagnostics.empty());
    EXPECT_FALSE(r.model.edited);
}

TEST(Summarize, EmptyDocumentFailsBeforeProviderCall) {
    CannedLlm llm("Synonyms: x");
    try {
        dm::summarize_document("  \n", "tungsten skarn", llm);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::input);
    }
    EXPECT_EQ(llm.calls, 0);
}

TEST(Summarize, ErrorsAreDistinct) {
    FailingLlm failing;
    try {
        dm::summarize_document("doc", "t", failing);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::provider);
    }
    CannedLlm garbage("no structure here");
    EXPECT_THROW(dm::summarize_document("doc", "t", garbage), dm::CompletionParseError);
    CannedLlm partial("Synonyms: a\nCommodities: W\n");
    try {
        dm::summarize_document("doc", "t", partial);
        FAIL();
    } catch (const dm::CompletionParseError&) {
        FAIL() << "partial completion should fail validation, not parsing";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
    }
}
