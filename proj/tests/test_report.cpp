#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dispatchlab/error.hpp"
#include "dispatchlab/report.hpp"

using namespace dispatchlab;
using namespace dispatchlab::report;
using nlohmann::json;

namespace {

// Minimal JSON-Schema validator covering the subset the shipped schema uses:
// type, required, properties, additionalProperties, items, enum.
bool validates(const json& value, const json& schema, std::string& why, std::string path = "$") {
    if (schema.contains("type")) {
        const std::string t = schema["type"];
        bool ok = (t == "object" && value.is_object()) || (t == "array" && value.is_array()) ||
                  (t == "string" && value.is_string()) ||
                  (t == "integer" && value.is_number_integer()) ||
                  (t == "number" && value.is_number()) ||
                  (t == "boolean" && value.is_boolean());
        if (!ok) {
            why = path + ": expected " + t;
            return false;
        }
    }
    if (schema.contains("enum")) {
        bool hit = false;
        for (const auto& e : schema["enum"]) hit |= (e == value);
        if (!hit) {
            why = path + ": not in enum";
            return false;
        }
    }
    if (schema.contains("required")) {
        for (const auto& r : schema["required"]) {
            if (!value.contains(r.get<std::string>())) {
                why = path + ": missing required '" + r.get<std::string>() + "'";
                return false;
            }
        }
    }
    if (schema.contains("properties") && value.is_object()) {
        for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it) {
            if (value.contains(it.key())) {
                if (!validates(value[it.key()], it.value(), why, path + "." + it.key()))
                    return false;
            }
        }
    }
    if (schema.contains("additionalProperties") && schema["additionalProperties"].is_object() &&
        value.is_object()) {
        bool has_props = schema.contains("properties");
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (has_props && schema["properties"].contains(it.key())) continue;
            if (!validates(it.value(), schema["additionalProperties"], why,
                           path + "." + it.key()))
                return false;
        }
    }
    if (schema.contains("items") && value.is_array()) {
        for (size_t i = 0; i < value.size(); i++) {
            if (!validates(value[i], schema["items"], why,
                           path + "[" + std::to_string(i) + "]"))
                return false;
        }
    }
    return true;
}

json shipped_schema() {
    std::ifstream f(std::string(SOURCE_DIR) + "/schemas/result_record.schema.json");
    REQUIRE(f.good());
    return json::parse(f);
}

std::string dump_json(const ResultRecord& rec) {
    std::ostringstream os;
    emit(rec, os, Format::json);
    return os.str();
}

}  // namespace

TEST_CASE("experiment registry") {
    CHECK(experiment_from_string("crossover").has_value());
    CHECK(experiment_from_string("toy-decode").has_value());
    CHECK_FALSE(experiment_from_string("nope").has_value());
    CHECK_FALSE(needs_gpu(ExperimentId::crossover));
    CHECK_FALSE(needs_gpu(ExperimentId::sensitivity));
    CHECK(needs_gpu(ExperimentId::timeline));
}

TEST_CASE("round_sig6") {
    CHECK(round_sig6(95.512820512) == doctest::Approx(95.5128).epsilon(1e-9));
    CHECK(round_sig6(0.000123456789) == doctest::Approx(0.000123457).epsilon(1e-9));
    CHECK(round_sig6(0.0) == 0.0);
    CHECK(round_sig6(-118.333333) == doctest::Approx(-118.333).epsilon(1e-9));
}

TEST_CASE("crossover record: byte-deterministic, schema-valid, reproduces the table") {
    RunConfig cfg;
    auto r1 = run(ExperimentId::crossover, cfg);
    auto r2 = run(ExperimentId::crossover, cfg);
    CHECK(dump_json(r1) == dump_json(r2));

    std::string why;
    CHECK_MESSAGE(validates(r1.doc, shipped_schema(), why), why);

    const auto& rows = r1.doc["derived"]["rows"];
    REQUIRE(rows.size() == 6);
    long expected[] = {119, 22, 22, 40, 7, 7};
    for (size_t i = 0; i < 6; i++) {
        long b = rows[i]["b_star"].get<long>();
        CHECK(std::labs(b - expected[i]) <= 1);
        CHECK(rows[i]["regime_at_batch_1"] == "overhead-bound");
    }
}

TEST_CASE("sensitivity record: stable dominance, valid, deterministic") {
    RunConfig cfg;
    auto r = run(ExperimentId::sensitivity, cfg);
    CHECK(r.doc["derived"]["dominance_stable"].get<bool>());
    CHECK(r.doc["derived"]["rows"].size() == 27);
    std::string why;
    CHECK_MESSAGE(validates(r.doc, shipped_schema(), why), why);
    auto r2 = run(ExperimentId::sensitivity, cfg);
    CHECK(dump_json(r) == dump_json(r2));
}

TEST_CASE("JSON: keys sorted, schema_version present, comparisons omitted when empty") {
    RunConfig cfg;
    auto r = run(ExperimentId::crossover, cfg);
    CHECK(r.doc["schema_version"] == 1);
    CHECK_FALSE(r.doc.contains("comparisons"));
    std::string text = dump_json(r);
    CHECK(text.find("\"config\"") < text.find("\"derived\""));
    CHECK(text.find("\"derived\"") < text.find("\"experiment\""));
    // round-trip parse is structurally identical
    CHECK(json::parse(text) == r.doc);
}

TEST_CASE("GPU experiment records validate and carry hardware + comparisons") {
    RunConfig cfg;
    cfg.runs = 10;
    cfg.warmup = 2;
    cfg.hidden = 128;
    auto r = run(ExperimentId::rmsnorm_fusion, cfg);
    std::string why;
    CHECK_MESSAGE(validates(r.doc, shipped_schema(), why), why);
    CHECK(r.doc["hardware"]["backend"] == "software");
    CHECK(r.doc["hardware"]["is_fallback_adapter"].get<bool>());
    REQUIRE(r.doc.contains("comparisons"));
    CHECK(r.doc["comparisons"].size() == 1);
    double p = r.doc["comparisons"][0]["p_two_tailed"].get<double>();
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(r.doc["derived"]["speedup"].get<double>() > 0.0);
    CHECK(r.doc["series"]["unfused_ms"]["samples"].size() == 10);
}

TEST_CASE("toy-decode record carries the published result-file field names") {
    RunConfig cfg;
    cfg.runs = 10;
    cfg.warmup = 0;
    cfg.tokens = 8;
    cfg.model = "tiny";
    auto r = run(ExperimentId::toy_decode, cfg);
    std::string why;
    CHECK_MESSAGE(validates(r.doc, shipped_schema(), why), why);
    for (const char* variant : {"unfused", "fused", "tiled"}) {
        const auto& v = r.doc["derived"][variant];
        for (const char* key :
             {"tokens_per_second", "tokens_per_second_std", "tokens_per_second_ci95",
              "coefficient_of_variation", "time_to_first_token_ms",
              "time_to_first_token_ci95_ms", "all_tps", "all_ttft_ms"})
            CHECK_MESSAGE(v.contains(key), variant, " missing ", key);
        CHECK(v["all_tps"].size() == 10);
    }
    CHECK(r.doc["derived"]["greedy_tokens_identical_across_variants"].get<bool>());
    CHECK(r.doc["config"]["runs"] == 10);
    CHECK(r.doc["config"]["model"] == "tiny");
}

TEST_CASE("every experiment produces a schema-valid record") {
    json schema = shipped_schema();
    RunConfig cfg;
    cfg.runs = 10;
    cfg.warmup = 2;
    cfg.tokens = 5;
    cfg.model = "tiny";
    cfg.hidden = 64;
    cfg.intermediate = 64;
    cfg.dims = {48, 48, 48};
    cfg.n_dispatches = 40;
    for (const char* name :
         {"seq-dispatch", "single-op", "timeline", "rmsnorm-fusion", "mlp-strategies",
          "mega-kernel", "matmul-efficiency", "argmax-compare", "toy-decode", "crossover",
          "sensitivity"}) {
        auto id = experiment_from_string(name);
        REQUIRE(id.has_value());
        auto rec = run(*id, cfg);
        std::string why;
        CHECK_MESSAGE(validates(rec.doc, schema, why), name, ": ", why);
        CHECK(rec.doc["experiment"] == name);
    }
}

TEST_CASE("CSV: one row per sample plus a summary row per series") {
    RunConfig cfg;
    cfg.runs = 10;
    cfg.warmup = 2;
    cfg.hidden = 64;
    auto r = run(ExperimentId::rmsnorm_fusion, cfg);
    std::ostringstream os;
    emit(r, os, Format::csv);
    std::string text = os.str();
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    CHECK(line == "series,kind,index,value,mean,std,ci95_low,ci95_high,cv_percent");
    int samples = 0, summaries = 0;
    while (std::getline(is, line)) {
        if (line.find(",sample,") != std::string::npos) samples++;
        if (line.find(",summary,") != std::string::npos) summaries++;
    }
    CHECK(samples == 20);  // 2 series x 10 runs
    CHECK(summaries == 2);
}

TEST_CASE("CSV for sample-less experiments emits the derived row table") {
    RunConfig cfg;
    auto r = run(ExperimentId::crossover, cfg);
    std::ostringstream os;
    emit(r, os, Format::csv);
    std::string text = os.str();
    CHECK(text.find("b_star") != std::string::npos);
    CHECK(text.find("overhead-bound") != std::string::npos);
}

TEST_CASE("emit_file writes and fails loudly on bad paths") {
    RunConfig cfg;
    auto r = run(ExperimentId::crossover, cfg);
    emit_file(r, "/tmp/dispatch_lab_test_emit.json", Format::json);
    std::ifstream f("/tmp/dispatch_lab_test_emit.json");
    CHECK(f.good());
    CHECK_THROWS_AS(emit_file(r, "/nonexistent-dir/x.json", Format::json), Error);
}

TEST_CASE("CLI binary: exit codes and stdout silence") {
    std::string bin = std::string(CLI_BINARY);
    // unknown experiment -> exit 2
    int rc = std::system((bin + " --experiment nope >/tmp/dl_stdout.txt 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(rc) == 2);
    // success -> exit 0, nothing on stdout, file written
    rc = std::system((bin +
                      " --experiment crossover --out /tmp/dl_cli.json >/tmp/dl_stdout.txt "
                      "2>/dev/null")
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 0);
    std::ifstream out("/tmp/dl_stdout.txt", std::ios::ate);
    CHECK(out.tellg() == 0);
    std::ifstream produced("/tmp/dl_cli.json");
    CHECK(produced.good());
    // env var override: request a backend with no adapter -> exit 2
    rc = std::system(("DISPATCH_LAB_BACKEND=vulkan " + bin +
                      " --experiment timeline >/dev/null 2>/dev/null")
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 2);
    // csv output lands on disk with the expected header
    rc = std::system((bin +
                      " --experiment crossover --format csv --out /tmp/dl_cli.csv "
                      ">/dev/null 2>/dev/null")
                         .c_str());
    CHECK(WEXITSTATUS(rc) == 0);
    std::ifstream csv("/tmp/dl_cli.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header.find("b_star") != std::string::npos);
}
