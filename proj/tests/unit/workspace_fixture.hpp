#pragma once

#include "lithoquery/embed.hpp"
#include "lithoquery/service/workspace.hpp"

#include "fixtures.hpp"

#include <cmath>
#include <map>

namespace lqtest {

using lithoquery::service::Json;

// Provider with hand-set 2-d vectors: "q" is (1, 0) and every other known
// text sits at the given cosine to it.
class FixedProvider : public lithoquery::embed::EmbeddingProvider {
public:
    explicit FixedProvider(std::map<std::string, double> cosines) : cosines_(std::move(cosines)) {}
    const std::string& provider_id() const override { return id_; }
    lithoquery::embed::ProviderKind kind() const override { return lithoquery::embed::ProviderKind::reference; }
    const std::string& model_name() const override { return id_; }
    std::size_t dims() const override { return 2; }
    std::vector<std::vector<double>> compute(std::span<const std::string> texts) override {
        std::vector<std::vector<double>> out;
        for (const auto& t : texts) {
            const double c = t == "q" ? 1.0 : cosines_.at(t);
            out.push_back({c, std::sqrt(1.0 - c * c)});
        }
        return out;
    }

private:
    std::string id_ = "fixed";
    std::map<std::string, double> cosines_;
};

// Small geographic map near 117W 38N: host limestones, source intrusions
// and a few unrelated units. Names are UNIT_NAME values.
inline Json small_map() {
    std::vector<FeatureSpec> f;
    const char* names[] = {"limestone and calcareous pelite", "granodiorite and quartz monzonite",
                           "limestone and dolomite",          "tonalite and granite",
                           "basalt flows",                    "alluvium and gravel"};
    for (int i = 0; i < 6; ++i) {
        const double lon = -117.0 + 0.02 * i;
        f.push_back({lon, 38.0, lon + 0.02, 38.05,
                     {{"UNIT_LINK", "U" + std::to_string(i)}, {"STATE", "NV"}, {"UNIT_NAME", names[i]}}});
    }
    return Json::parse(feature_collection(f));
}

inline Json ingest_body(const std::string& dataset_id = "ds-small") {
    return Json{{"geojson", small_map()},
                {"signature_columns", {"UNIT_NAME"}},
                {"key_columns", {"STATE", "UNIT_LINK"}},
                {"min_desc_length", 0},
                {"dataset_id", dataset_id}};
}

inline lithoquery::service::ServiceConfig test_config(const std::filesystem::path& dir) {
    lithoquery::service::ServiceConfig c;
    c.data_dir = dir;
    c.models_dirs = {std::filesystem::path(LQ_ASSET_DIR) / "deposit-models"};
    c.job_threads = 2;
    return c;
}

}  // namespace lqtest
