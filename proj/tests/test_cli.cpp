#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include <sys/wait.h>

#include "cellseg/flows.hpp"
#include "cellseg/io/dcf1.hpp"
#include "cellseg/io/png_io.hpp"
#include "cellseg/synth.hpp"
#include "test_helpers.hpp"

namespace fs = std::filesystem;
using namespace cellseg;

namespace {

struct CliRun {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

struct CliFixture {
    fs::path dir;
    CliFixture() {
        dir = fs::temp_directory_path() /
              ("cellseg_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(dir);
    }
    ~CliFixture() { fs::remove_all(dir); }
    std::string file(const std::string& name) const { return (dir / name).string(); }

    CliRun run(const std::string& args) const {
        const std::string out = file("out.txt");
        const int rc = std::system(("'" CELLSEG_CLI_PATH "' " + args + " > '" + out +
                                    "' 2>&1").c_str());
        CliRun r;
        r.exit_code = rc == -1 ? -1 : WEXITSTATUS(rc);
        std::ifstream in(out, std::ios::binary);
        r.output.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        return r;
    }
};

}  // namespace

TEST_CASE("cli: identity evaluation prints the aggregate line") {
    CliFixture cli;
    auto [gt, pred] = testutil::shifted_square_pair();
    write_label_png(gt, cli.file("gt.png"));
    const CliRun r = cli.run("evaluate '" + cli.file("gt.png") + "' '" + cli.file("gt.png") + "'");
    CHECK(r.exit_code == 0);
    CHECK(r.output == "SEG=1.000000 DET=1.000000 MMA=1.000000\n");
}

TEST_CASE("cli: unreadable path names the file") {
    CliFixture cli;
    auto [gt, pred] = testutil::shifted_square_pair();
    write_label_png(gt, cli.file("gt.png"));
    const CliRun r =
        cli.run("evaluate '" + cli.file("gt.png") + "' '" + cli.file("missing.png") + "'");
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("missing.png") != std::string::npos);
}

TEST_CASE("cli: unknown flag is rejected") {
    CliFixture cli;
    const CliRun r = cli.run("tiles plan 512 512 --frobnicate");
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("frobnicate") != std::string::npos);
}

TEST_CASE("cli: format violations carry distinct diagnostics") {
    CliFixture cli;
    write_rgb_png(RgbImage(8, 8), cli.file("rgb.png"));
    const CliRun color = cli.run("flows encode '" + cli.file("rgb.png") + "' -o '" +
                                 cli.file("f.dcf1") + "'");
    CHECK(color.exit_code != 0);
    CHECK(color.output.find("3 channels") != std::string::npos);

    {
        std::ofstream bad(cli.file("bad.dcf1"), std::ios::binary);
        bad << "JUNKJUNKJUNKJUNKJUNK";
    }
    const CliRun magic =
        cli.run("flows decode '" + cli.file("bad.dcf1") + "' -o '" + cli.file("m.png") + "'");
    CHECK(magic.exit_code != 0);
    CHECK(magic.output.find("not a DCF1 file") != std::string::npos);

    write_dcf1(PlanarField(2, 8, 8), cli.file("two.dcf1"));
    const CliRun chans =
        cli.run("flows decode '" + cli.file("two.dcf1") + "' -o '" + cli.file("m.png") + "'");
    CHECK(chans.exit_code != 0);
    CHECK(chans.output.find("expected 3 channels") != std::string::npos);
}

TEST_CASE("cli: directory mode reports unpaired files and fails") {
    CliFixture cli;
    fs::create_directories(cli.dir / "gt");
    fs::create_directories(cli.dir / "pred");
    auto [gt, pred] = testutil::shifted_square_pair();
    write_label_png(gt, (cli.dir / "gt" / "a.png").string());
    write_label_png(pred, (cli.dir / "pred" / "a.png").string());
    write_label_png(gt, (cli.dir / "gt" / "stray.png").string());

    const std::string report = cli.file("report.json");
    const CliRun r = cli.run("evaluate '" + (cli.dir / "gt").string() + "' '" +
                             (cli.dir / "pred").string() + "' --report '" + report + "'");
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("stray") != std::string::npos);
    std::ifstream in(report);
    REQUIRE(in.good());
    const std::string json((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    CHECK(json.find("\"failures\"") != std::string::npos);
    CHECK(json.find("stray") != std::string::npos);
}

TEST_CASE("cli: loss output matches the library to printed precision") {
    CliFixture cli;
    SynthSpec spec;
    spec.seed = 12;
    const LabelMask m = gen_instances(spec);
    write_label_png(m, cli.file("m.png"));
    const PlanarField f = masks_to_flows(m).to_planar();
    write_dcf1(f, cli.file("a.dcf1"));
    write_dcf1(PlanarField(3, f.height, f.width), cli.file("zero.dcf1"));

    const CliRun r = cli.run("loss '" + cli.file("a.dcf1") + "' '" + cli.file("zero.dcf1") +
                             "' '" + cli.file("m.png") + "'");
    REQUIRE(r.exit_code == 0);
    const double printed = std::stod(r.output);
    const double expected = ignore_masked_loss(ObjectiveField::from_planar(f),
                                               ObjectiveField::from_planar(
                                                   PlanarField(3, f.height, f.width)),
                                               make_weight_mask(m));
    CHECK(printed == Catch::Approx(expected).margin(1e-9));
}
