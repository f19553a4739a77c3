// idps: trace generation, profile training, detection and evaluation for
// the simulated cloud IDPS. Exit codes: 0 success, 1 usage error, 2 input
// parse error, 3 I/O error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "idps/anomaly.hpp"
#include "idps/eval.hpp"
#include "idps/event.hpp"
#include "idps/matcher.hpp"
#include "idps/pipeline.hpp"
#include "idps/rule.hpp"
#include "idps/sim.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw idps::IoError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw idps::IoError("cannot write file: " + path);
    out << content;
    if (!out) throw idps::IoError("write failed: " + path);
}

std::vector<idps::Event> read_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw idps::IoError("cannot open file: " + path);
    return idps::read_trace(in);
}

struct GenArgs {
    std::uint64_t seed = 42;
    double duration = 600.0;
    std::string out;
    std::string attacks;
    std::string config;
    bool seed_set = false;
    bool duration_set = false;
};

int cmd_gen(const GenArgs& args) {
    idps::sim::ScenarioConfig cfg;
    if (!args.config.empty()) cfg = idps::sim::scenario_from_json(read_file(args.config));
    if (args.seed_set || args.config.empty()) cfg.seed = args.seed;
    if (args.duration_set || args.config.empty()) cfg.duration_s = args.duration;
    if (!args.attacks.empty()) {
        cfg.attacks.clear();
        std::stringstream ss(args.attacks);
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto kind = idps::sim::attack_kind_from_string(item);
            if (!kind) throw CLI::ValidationError("--attacks", "unknown attack kind: " + item);
            cfg.attacks.push_back(idps::sim::default_attack(*kind));
        }
    }
    std::vector<idps::Event> events = idps::sim::generate(cfg);
    std::string text;
    for (const idps::Event& e : events) {
        text += idps::serialize_event(e);
        text += '\n';
    }
    write_file(args.out, text);
    std::cout << "wrote " << events.size() << " events to " << args.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string in;
    double window = 10.0;
    std::string profile;
};

int cmd_train(const TrainArgs& args) {
    std::vector<idps::Event> events = read_trace_file(args.in);
    idps::Profile profile = idps::train(events, args.window);
    write_file(args.profile, idps::save_profile(profile) + "\n");
    std::cout << "trained profile on " << profile.n << " (entity, window) samples from "
              << events.size() << " events\n";
    return 0;
}

struct DetectArgs {
    std::string in;
    std::string rules;
    std::string profile;
    std::string mode = "inline";
    double tau = 4.0;
    std::string anomaly_action = "block-attacker";
    std::string alerts;
    std::string promoted;
    std::string dump_blocks;
    std::string verdicts;
};

int cmd_detect(const DetectArgs& args) {
    std::vector<idps::Event> events = read_trace_file(args.in);
    idps::CompiledRuleset ruleset = idps::compile(idps::parse_ruleset(read_file(args.rules)));
    idps::Profile profile = idps::load_profile(read_file(args.profile));
    auto mode = idps::mode_from_string(args.mode);
    if (!mode) throw CLI::ValidationError("--mode", "expected passive or inline");

    idps::PipelineConfig cfg;
    cfg.tau = args.tau;
    cfg.window_s = profile.window_s;
    cfg.mode = *mode;
    if (args.anomaly_action == "alert-only")
        cfg.anomaly_action = idps::ResponseKind::alert_only;
    else if (args.anomaly_action != "block-attacker")
        throw CLI::ValidationError("--anomaly-action", "expected block-attacker or alert-only");

    std::string digest = idps::trace_digest(events);
    std::ofstream alerts_out(args.alerts, std::ios::binary);
    if (!alerts_out) throw idps::IoError("cannot write file: " + args.alerts);

    idps::Pipeline pipeline(std::move(ruleset), std::move(profile), cfg);
    pipeline.set_alert_sink([&](const idps::Alert& a) {
        alerts_out << idps::serialize_alert(a, digest) << '\n';
    });

    std::ofstream verdicts_out;
    if (!args.verdicts.empty()) {
        verdicts_out.open(args.verdicts, std::ios::binary);
        if (!verdicts_out) throw idps::IoError("cannot write file: " + args.verdicts);
    }

    std::size_t line_no = 0;
    for (const idps::Event& e : events) {
        ++line_no;
        idps::Verdict v = pipeline.process(e);
        if (verdicts_out.is_open()) {
            nlohmann::ordered_json obj;
            obj["line"] = line_no;
            obj["ts"] = e.ts();
            switch (v.kind) {
                case idps::Verdict::Kind::blocked:
                    obj["verdict"] = "blocked";
                    obj["reason"] = {{"kind", idps::to_string(v.block_reason->kind)},
                                     {"key", v.block_reason->key}};
                    break;
                case idps::Verdict::Kind::signature_alert: {
                    obj["verdict"] = "signature_alert";
                    std::vector<std::uint32_t> sids;
                    for (const idps::Match& m : v.matches) sids.push_back(m.sid);
                    obj["sids"] = sids;
                    break;
                }
                case idps::Verdict::Kind::passed:
                    obj["verdict"] = "passed";
                    break;
            }
            verdicts_out << obj.dump() << '\n';
        }
    }
    pipeline.finish();

    if (!args.promoted.empty())
        write_file(args.promoted, idps::serialize_ruleset(pipeline.promoted()));
    if (!args.dump_blocks.empty()) write_file(args.dump_blocks, idps::dump_blocks(pipeline.blocks()));

    const idps::PipelineStats& stats = pipeline.stats();
    std::cout << "processed " << stats.events << " events: " << stats.signature_alerts
              << " signature alerts, " << stats.anomaly_alerts << " anomaly alerts, "
              << stats.blocked << " blocked, " << stats.promoted_rules << " promoted rules\n";
    return 0;
}

struct EvaluateArgs {
    std::string alerts;
    std::string truth;
    double window = 10.0;
    std::string report;
    std::string verdicts;
};

int cmd_evaluate(const EvaluateArgs& args) {
    std::vector<idps::AlertRecord> alerts = idps::parse_alerts(read_file(args.alerts));
    std::vector<idps::Event> truth = read_trace_file(args.truth);
    idps::EvalReport report = idps::evaluate(alerts, truth, args.window);
    if (!args.verdicts.empty()) {
        std::uint64_t blocked = 0;
        std::istringstream in(read_file(args.verdicts));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto obj = nlohmann::json::parse(line, nullptr, false);
            if (obj.is_discarded() || !obj.is_object() || !obj.contains("verdict"))
                throw idps::ParseError("malformed verdict record", "verdict", line_no);
            if (obj["verdict"] == "blocked") ++blocked;
        }
        report.blocked_events = blocked;
    }
    report.config_echo["alerts"] = args.alerts;
    report.config_echo["truth"] = args.truth;
    report.config_echo["window"] = std::to_string(args.window);
    if (!args.verdicts.empty()) report.config_echo["verdicts"] = args.verdicts;
    std::cout << idps::report_to_text(report);
    if (!args.report.empty()) write_file(args.report, idps::report_to_json(report));
    return 0;
}

int cmd_rules_validate(const std::string& path) {
    std::vector<idps::Rule> rules = idps::parse_ruleset(read_file(path));
    std::cout << "ok: " << rules.size() << " rules\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"integrated intrusion detection and prevention for simulated cloud traces"};
    app.require_subcommand(1);

    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a labeled scenario trace");
    auto* seed_opt = gen_cmd->add_option("--seed", gen.seed, "scenario seed");
    auto* duration_opt = gen_cmd->add_option("--duration", gen.duration, "trace duration, seconds");
    gen_cmd->add_option("--out", gen.out, "output trace path (JSONL)")->required();
    gen_cmd->add_option("--attacks", gen.attacks,
                        "comma-separated attack kinds (scan,bruteforce,exploit,exfil)");
    gen_cmd->add_option("--config", gen.config, "scenario config JSON path");

    TrainArgs train;
    CLI::App* train_cmd = app.add_subcommand("train", "train a normal-behavior profile");
    train_cmd->add_option("--in", train.in, "training trace path")->required();
    train_cmd->add_option("--window", train.window, "window length, seconds");
    train_cmd->add_option("--profile", train.profile, "output profile path")->required();

    DetectArgs detect;
    CLI::App* detect_cmd = app.add_subcommand("detect", "run the detection pipeline over a trace");
    detect_cmd->add_option("--in", detect.in, "input trace path")->required();
    detect_cmd->add_option("--rules", detect.rules, "ruleset path")->required();
    detect_cmd->add_option("--profile", detect.profile, "trained profile path")->required();
    detect_cmd->add_option("--mode", detect.mode, "passive|inline");
    detect_cmd->add_option("--tau", detect.tau, "anomaly score threshold");
    detect_cmd->add_option("--anomaly-action", detect.anomaly_action,
                           "response to anomaly alerts: block-attacker|alert-only");
    detect_cmd->add_option("--alerts", detect.alerts, "output alerts path (JSONL)")->required();
    detect_cmd->add_option("--promoted", detect.promoted, "write promoted rules here");
    detect_cmd->add_option("--dump-blocks", detect.dump_blocks, "write final block table here");
    detect_cmd->add_option("--verdicts", detect.verdicts, "write per-event verdicts here");

    EvaluateArgs evaluate;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "score alerts against ground truth");
    eval_cmd->add_option("--alerts", evaluate.alerts, "alerts path")->required();
    eval_cmd->add_option("--truth", evaluate.truth, "labeled trace path")->required();
    eval_cmd->add_option("--window", evaluate.window, "window length, seconds");
    eval_cmd->add_option("--report", evaluate.report, "output report JSON path");
    eval_cmd->add_option("--verdicts", evaluate.verdicts, "verdict stream from detect");

    std::string rules_file;
    CLI::App* rules_cmd = app.add_subcommand("rules", "ruleset utilities");
    CLI::App* validate_cmd = rules_cmd->add_subcommand("validate", "parse and check a ruleset");
    validate_cmd->add_option("file", rules_file, "ruleset path")->required();
    rules_cmd->require_subcommand(1);

    try {
        app.parse(argc, argv);
        gen.seed_set = seed_opt->count() > 0;
        gen.duration_set = duration_opt->count() > 0;
        if (*gen_cmd) return cmd_gen(gen);
        if (*train_cmd) return cmd_train(train);
        if (*detect_cmd) return cmd_detect(detect);
        if (*eval_cmd) return cmd_evaluate(evaluate);
        if (*validate_cmd) return cmd_rules_validate(rules_file);
        return 1;
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 1;
    } catch (const idps::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const idps::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
