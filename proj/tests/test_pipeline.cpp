#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "capcurve/pipeline.hpp"
#include "capcurve/synthetic.hpp"

using namespace capcurve;
namespace fs = std::filesystem;

namespace {

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("capcurve_pipeline_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    const auto demo = synthetic::demo_data();
    std::ofstream runs(dir_ / "runs.csv");
    write_runs_csv(runs, demo.runs);
    std::ofstream models(dir_ / "models.csv");
    write_models_csv(models, demo.models);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static RunManifest manifest(const std::string& out) {
    RunManifest m;
    m.runs_path = dir_ / "runs.csv";
    m.models_path = dir_ / "models.csv";
    m.out_dir = dir_ / out;
    return m;
  }

  static inline fs::path dir_;
};

}  // namespace

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(PipelineTest, FullRunIsByteIdenticalAcrossInvocations) {
  const auto runs_before = read_file(dir_ / "runs.csv");
  const auto a = manifest("a"), b = manifest("b");
  write_artifacts(run_pipeline(a), a);
  write_artifacts(run_pipeline(b), b);
  for (const char* name : {"report.json", "fits.json", "horizons.csv", "forecast.csv", "trends.svg"})
    EXPECT_EQ(read_file(a.out_dir / name), read_file(b.out_dir / name)) << name;
  EXPECT_EQ(read_file(dir_ / "runs.csv"), runs_before);

  const auto report = nlohmann::json::parse(read_file(a.out_dir / "report.json"));
  EXPECT_EQ(report["mse_table"].size(), 5u);
  EXPECT_EQ(report["inflections"].size(), 3u);
  EXPECT_EQ(report["n_horizons"], 15);
  EXPECT_EQ(report["horizon_source"], "refit");
  EXPECT_TRUE(report.contains("doubling_time_months"));
  EXPECT_TRUE(report.contains("divergence"));
  bool has_ordering = false;
  for (const auto& c : report["reference_checks"]) has_ordering |= c["quantity"] == "mse_ordering";
  EXPECT_TRUE(has_ordering);
  for (size_t i = 1; i < report["mse_table"].size(); ++i)
    EXPECT_LE(report["mse_table"][i - 1]["mse"].get<double>(), report["mse_table"][i]["mse"].get<double>());
  for (const char* name : {"projection_sigmoid-link.svg", "projection_exp-link.svg", "projection_bspline-link.svg"})
    EXPECT_TRUE(fs::exists(a.out_dir / name)) << name;
}

TEST_F(PipelineTest, SpecificationSubset) {
  auto m = manifest("subset");
  m.specs = {Specification::SigmoidLink};
  const auto res = run_pipeline(m);
  ASSERT_EQ(res.report["mse_table"].size(), 1u);
  EXPECT_EQ(res.report["mse_table"][0]["spec"], "sigmoid-link");
  EXPECT_EQ(res.report["inflections"].size(), 2u);
  EXPECT_FALSE(res.report.contains("divergence"));
  for (const auto& c : res.report["reference_checks"]) EXPECT_NE(c["quantity"], "mse_ordering");
}

TEST_F(PipelineTest, ProvenanceRecordsSeedAndDigests) {
  auto m = manifest("prov");
  m.specs = {Specification::MetrExponential};
  m.seed = 99;
  const auto res = run_pipeline(m);
  const auto& prov = res.report["provenance"];
  EXPECT_EQ(prov["seed"], 99);
  EXPECT_EQ(prov["tool"], "capcurve");
  ASSERT_EQ(prov["inputs"].size(), 2u);
  EXPECT_EQ(prov["inputs"][0]["role"], "runs");
  EXPECT_EQ(prov["inputs"][0]["file"], "runs.csv");
  EXPECT_EQ(prov["inputs"][0]["sha256"], sha256_hex(read_file(m.runs_path)));
  EXPECT_EQ(prov["inputs"][1]["sha256"], sha256_hex(read_file(m.models_path)));
  EXPECT_EQ(res.fits_document["provenance"], prov);

  write_artifacts(res, m);
  std::ifstream csv(m.out_dir / "forecast.csv");
  std::string first;
  std::getline(csv, first);
  EXPECT_EQ(first, res.inputs.provenance.comment_line());
  EXPECT_NE(first.find("seed=99"), std::string::npos);
}

TEST_F(PipelineTest, PublishedHorizons) {
  std::ofstream(dir_ / "published.csv") << "model_id,h_minutes\nGPT-4,5.4\nGPT-4o,9.2\nGPT-o3,92\nnot-in-table,1\nGPT-5,137\n";
  auto m = manifest("published");
  m.use_published_horizons = true;
  m.horizons_path = dir_ / "published.csv";
  m.specs = {Specification::MetrExponential, Specification::SigmoidCurve};
  const auto res = run_pipeline(m);
  EXPECT_EQ(res.report["horizon_source"], "published");
  EXPECT_EQ(res.report["n_horizons"], 4);
  EXPECT_EQ(res.report["provenance"]["inputs"].size(), 3u);
  EXPECT_EQ(res.horizons[0].model_id, "GPT-4");
  EXPECT_EQ(res.horizons[3].h_minutes, 137.0);

  auto missing = m;
  missing.horizons_path.reset();
  EXPECT_THROW(run_pipeline(missing), Error);
}

TEST_F(PipelineTest, FitsDocumentRoundTrip) {
  auto m = manifest("roundtrip");
  m.specs = {Specification::MetrExponential, Specification::SigmoidCurve, Specification::BSplineLink};
  const auto res = run_pipeline(m);
  const auto back = parse_fits(json_text(res.fits_document));
  ASSERT_EQ(back.size(), res.fits.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].spec, res.fits[i].spec);
    EXPECT_EQ(back[i].converged, res.fits[i].converged);
    for (double d : {0.0, 3.3, 6.9, 9.5}) EXPECT_EQ(predict(back[i], d, true), predict(res.fits[i], d, true));
  }
  EXPECT_THROW(parse_fits("{\"nope\": 1}"), Error);
  EXPECT_THROW(parse_fits("{\"fits\": [{\"spec\": \"quadratic\", \"params\": {}}]}"), Error);
}

TEST_F(PipelineTest, EmptyInputs) {
  std::ofstream(dir_ / "empty_runs.csv") << "model_id,task_id,task_family,human_minutes,success,attempt\n";
  auto m = manifest("empty");
  m.runs_path = dir_ / "empty_runs.csv";
  try {
    run_pipeline(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
    EXPECT_EQ(e.detail(), "no runs");
  }
  m = manifest("none");
  m.specs.clear();
  EXPECT_THROW(run_pipeline(m), Error);
}
