#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>

using nlohmann::json;

namespace {

struct Run {
    int status = -1;
    std::string out;
    std::string err;
};

const std::string roles = "'W=w1,w2;A=a;Y=y;kind=binary'";

// Runs the CLI with `args`; stdout and stderr go to files next to `dir`.
Run halmle(const std::string& args, const std::string& tag) {
    const auto out = testing::temp_path(tag + ".stdout");
    const auto err = testing::temp_path(tag + ".stderr");
    const std::string cmd = std::string(HALMLE_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = testing::read_text(out);
    r.err = testing::read_text(err);
    return r;
}

std::string out_dir(const std::string& tag) {
    const auto p = testing::temp_path("cli-" + tag);
    std::filesystem::remove_all(p);
    return p.string();
}

std::string on_sample(const std::string& command, const std::string& dir) {
    return command + " --data " + HALMLE_SAMPLE + " --roles " + roles + " --out-dir " + dir;
}

json load(const std::string& dir, const std::string& name) {
    return json::parse(testing::read_text(std::filesystem::path(dir) / name));
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("fit on the sample data writes a fit report") {
    const std::string dir = out_dir("fit");
    const Run r = halmle(on_sample("fit", dir) + " --seed 1", "fit");
    REQUIRE(r.status == 0);
    CHECK(r.out.find("n=20") != std::string::npos);
    CHECK(r.out.find("l1_norm=") != std::string::npos);
    const json j = load(dir, "fit.json");
    CHECK(j["schema_version"] == 1);
    CHECK(j["command"] == "fit");
    CHECK(j.contains("score_diagnostics"));
}

TEST_CASE("missing outcome role exits 2 and names the field") {
    const Run r = halmle(std::string("fit --data ") + HALMLE_SAMPLE + " --roles 'W=w1,w2;A=a' --out-dir " +
                             out_dir("noy"),
                         "noy");
    CHECK(r.status == 2);
    CHECK(r.err.find("outcome") != std::string::npos);
}

TEST_CASE("configuration errors exit 2") {
    CHECK(halmle(std::string("fit --data /nonexistent.csv --roles ") + roles, "nofile").status == 2);
    CHECK(halmle(on_sample("estimate", out_dir("bad")) + " --method bogus", "bad").status == 2);
    CHECK(halmle("simulate --dgp A --replicates 0 --out-dir " + out_dir("zero"), "zero").status == 2);
    const Run u = halmle("simulate --dgp nope --replicates 2 --out-dir " + out_dir("nodgp"), "nodgp");
    CHECK(u.status == 2);
    CHECK(u.err.find("nope") != std::string::npos);
}

TEST_CASE("fit is byte-identical across runs with the same seed") {
    const std::string a = out_dir("det-a"), b = out_dir("det-b");
    REQUIRE(halmle(on_sample("fit", a) + " --seed 7", "det-a").status == 0);
    REQUIRE(halmle(on_sample("fit", b) + " --seed 7", "det-b").status == 0);
    CHECK(testing::read_text(std::filesystem::path(a) / "fit.json") ==
          testing::read_text(std::filesystem::path(b) / "fit.json"));
}

TEST_CASE("plug-in estimate is finite with an ordered interval") {
    const std::string dir = out_dir("plugin");
    REQUIRE(halmle(on_sample("estimate", dir) + " --method plugin", "plugin").status == 0);
    const json rep = load(dir, "estimate.json")["report"];
    CHECK(std::isfinite(rep["psi"].get<double>()));
    CHECK(rep["ci"][0].get<double>() <= rep["ci"][1].get<double>());
    CHECK(rep["se"].get<double>() > 0.0);
}

TEST_CASE("infinite tolerance constant records no fluctuation steps") {
    const std::string dir = out_dir("inf");
    REQUIRE(halmle(on_sample("estimate", dir) + " --method tmle --tol-const inf", "inf").status == 0);
    CHECK(load(dir, "estimate.json")["report"]["steps"] == 0);
}

TEST_CASE("tmle and tmle_preserving both solve the score equation") {
    for (const char* m : {"tmle", "tmle_preserving"}) {
        CAPTURE(m);
        const std::string dir = out_dir(m);
        const Run r = halmle(on_sample("estimate", dir) + " --method " + m, m);
        REQUIRE(r.status == 0);
        CHECK(r.out.find(m) != std::string::npos);
        const json rep = load(dir, "estimate.json")["report"];
        CHECK(rep["abs_pn_dstar"].get<double>() <= rep["tol"].get<double>());
        if (std::string(m) == "tmle_preserving") CHECK(rep["battery_max"].get<double>() <= 1e-5);
    }
}

TEST_CASE("unmet undersmoothing criterion exits 4 and still writes the report") {
    const std::string dir = out_dir("unmet");
    const Run r = halmle(on_sample("estimate", dir) +
                             " --method plugin --undersmooth --set estimate.undersmooth_constant=1e-9",
                         "unmet");
    CHECK(r.status == 4);
    CHECK(load(dir, "estimate.json")["criterion_unmet"] == true);
}

TEST_CASE("simulate writes one CSV row per replicate and a summary") {
    const std::string dir = out_dir("sim");
    REQUIRE(halmle("simulate --dgp A --n 100 --replicates 2 --seed 3 --out-dir " + dir, "sim").status == 0);
    const std::string csv = testing::read_text(std::filesystem::path(dir) / "simulate.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(load(dir, "simulate.json")["summary"].contains("coverage"));
}

TEST_CASE("config file values are overridden by flags") {
    const auto ini = testing::write_text("cli.ini", "[cv]\nfolds = 3\n[run]\nseed = 5\n");
    const std::string dir = out_dir("ini");
    REQUIRE(halmle(on_sample("fit", dir) + " --config " + ini.string() + " --V 4", "ini").status == 0);
    const json cfg = load(dir, "fit.json")["config"];
    CHECK(cfg["cv.folds"] == "4");
    CHECK(cfg["run.seed"] == "5");
}

TEST_CASE("every remaining command runs on the sample data") {
    for (const char* c : {"cv", "bootstrap", "ctmle"}) {
        CAPTURE(c);
        const std::string dir = out_dir(std::string("cmd-") + c);
        CHECK(halmle(on_sample(c, dir) + " --B 20", c).status == 0);
        CHECK(std::filesystem::exists(std::filesystem::path(dir) / (std::string(c) + ".json")));
    }
    const std::string dir = out_dir("rate");
    CHECK(halmle("rate --dgp C --n-grid 50,100,200 --replicates 2 --out-dir " + dir, "rate").status == 0);
    CHECK(load(dir, "rate.json")["result"].contains("slope"));
}

} // TEST_SUITE
