#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(SMFSIM_PATH) + " " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::string out;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, p))
        out += buf;
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> v;
    std::stringstream ss(s);
    std::string l;
    while (std::getline(ss, l))
        if (!l.empty())
            v.push_back(l);
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch() {
    const auto d = fs::temp_directory_path() / "smfsim_cli_test";
    fs::create_directories(d);
    return d;
}

} // namespace

TEST_CASE("modes table over the default c range") {
    const auto r = run("modes");
    REQUIRE(r.code == 0);
    const auto l = lines(r.out);
    REQUIRE(l.size() == 52);
    CHECK(l[0] == "c, chi0, chi1, chi2");
    double c, x0, x1, x2;
    REQUIRE(std::sscanf(l[39].c_str(), "%lf, %lf, %lf, %lf", &c, &x0, &x1, &x2) == 4);
    CHECK(c == doctest::Approx(3.8));
    CHECK(x0 == doctest::Approx(1.0).epsilon(0.02));
    CHECK(x1 == doctest::Approx(0.9).epsilon(0.03));
    CHECK(x2 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("help on every subcommand") {
    for (const char* sub : {"", "modes", "calibrate", "scan", "fit", "oracle-check"}) {
        const auto r = run(std::string(sub) + " --help");
        CHECK(r.code == 0);
        CHECK(r.out.find("Usage") != std::string::npos);
    }
}

TEST_CASE("error exit codes") {
    const auto d = scratch();
    const auto empty = d / "empty.csv";
    std::ofstream(empty).close();
    auto r = run("fit " + empty.string());
    CHECK(r.code == 2);
    CHECK(r.out.rfind("error: config:", 0) == 0);

    r = run("scan -c " + (d / "missing.json").string());
    CHECK(r.code == 4);
    CHECK(r.out.rfind("error: io:", 0) == 0);

    r = run("calibrate -p multimode -s source.gamma_typo=1");
    CHECK(r.code == 2);
    CHECK(r.out.find("gamma_typo") != std::string::npos);

    r = run("calibrate -p nope");
    CHECK(r.code == 2);

    r = run("modes --bogus");
    CHECK(r.code == 2);
}

TEST_CASE("calibrate reports pump settings") {
    const auto r = run("calibrate -p single_mode");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("pair_probability") != std::string::npos);
    CHECK(r.out.find("pulse_energy_pJ") != std::string::npos);
}

TEST_CASE("identical invocations write identical files, fit reads them back") {
    const auto d = scratch();
    const std::string common = "scan -p multimode -s grid.points=129 -s scan.points=11 -j 2";
    const auto a = d / "a.csv";
    const auto b = d / "b.csv";
    REQUIRE(run(common + " -o " + a.string()).code == 0);
    REQUIRE(run(common + " -o " + b.string()).code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(lines(slurp(a)).size() == 12);

    const auto f = run("fit " + a.string());
    CHECK(f.code == 0);
    CHECK(f.out.find("V: ") != std::string::npos);
    const auto g = run("fit --observable twofold_accsub " + a.string());
    CHECK(g.code == 0);
}

TEST_CASE("oracle check via the CLI") {
    const auto r = run("oracle-check --states 10");
    CHECK(r.code == 0);
    CHECK(r.out.find("max_deviation") != std::string::npos);
}
