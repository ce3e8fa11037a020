use clap::{Parser, Subcommand, ValueEnum};
use hog::converse::{order_bound_check, tree_to_word, words_with_e};
use hog::ext::{desugar, parse_ext_grammar_with, print_ext_grammar, validate_ext, ExtGrammar};
use hog::grammar::{
    is_word_grammar, parse_grammar_with, print_grammar, validate, Grammar, ParseOptions,
};
use hog::preprocess::{normalize_order0_args, saturate_br};
use hog::semantics::{word_language_slice, EnumLimits};
use hog::step1::{transform_grammar1, Step1Options};
use hog::step2::{transform_grammar2, Step2Options};
use hog::verify::{
    compare_word_slices, default_budget_hi, pipeline_opts, LangKind, OracleParams,
    PipelineOptions, Verdict,
};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_VERIFY_FAIL: u8 = 1;
const EXIT_INPUT_ERROR: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "hog", version, about = "Higher-order grammar transformation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnumKind {
    Trees,
    Words,
    Frontier,
    Le,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Pre,
    Step1,
    Desugar,
    Step2,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a grammar file.
    Check { file: PathBuf },
    /// Enumerate a bounded slice of the grammar's language.
    Enum {
        file: PathBuf,
        #[arg(long, default_value_t = 12)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = EnumKind::Trees)]
        kind: EnumKind,
        #[arg(long, default_value_t = 16)]
        max_len: usize,
    },
    /// Run the grammar transformations up to the given stage.
    Transform {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Stage::All)]
        stage: Stage,
        /// Keep rules on unreachable (and, in step 1, unproductive)
        /// non-terminals.
        #[arg(long)]
        no_prune: bool,
        /// Dump the transformation derivations for step 1.
        #[arg(long)]
        trace: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write every intermediate stage into this directory.
        #[arg(long)]
        keep_stages: Option<PathBuf>,
    },
    /// Build the word grammar matching a tree grammar's frontier language.
    Converse {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare bounded language slices: one file against its own pipeline
    /// image, or two files against each other.
    Verify {
        file: PathBuf,
        file2: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        #[arg(long, default_value_t = 12)]
        budget: usize,
        #[arg(long)]
        budget_hi: Option<usize>,
        /// Print the machine-readable report.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT_ERROR)
        }
    }
}

/// A grammar file on disk: ordinary or `%extended`.
enum Input {
    Plain(Grammar),
    Ext(ExtGrammar),
}

fn read_input(path: &Path) -> Result<Input, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let opts = ParseOptions::default();
    if text.lines().any(|l| l.trim() == "%extended") {
        let g = parse_ext_grammar_with(&text, opts).map_err(|e| e.to_string())?;
        Ok(Input::Ext(g))
    } else {
        let g = parse_grammar_with(&text, opts).map_err(|e| e.to_string())?;
        Ok(Input::Plain(g))
    }
}

fn read_plain(path: &Path) -> Result<Grammar, String> {
    match read_input(path)? {
        Input::Plain(g) => Ok(g),
        Input::Ext(eg) => {
            let report = validate_ext(&eg);
            if !report.is_valid() {
                return Err(report.to_string());
            }
            Ok(desugar(&eg))
        }
    }
}

fn check_valid(g: &Grammar) -> Result<(), String> {
    let report = validate(g);
    if report.is_valid() {
        Ok(())
    } else {
        Err(report.to_string())
    }
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), String> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Check { file } => {
            let report = match read_input(&file)? {
                Input::Plain(g) => validate(&g),
                Input::Ext(g) => validate_ext(&g),
            };
            println!("{report}");
            Ok(if report.is_valid() {
                EXIT_OK
            } else {
                EXIT_INPUT_ERROR
            })
        }
        Command::Enum {
            file,
            budget,
            kind,
            max_len,
        } => {
            // extended inputs enumerate under the extended reduction rules
            // (including set narrowing), except for word slices, which are
            // defined on ordinary word grammars
            let input = read_input(&file)?;
            let eg = match &input {
                Input::Plain(g) => {
                    check_valid(g)?;
                    hog::ext::ExtGrammar::from_grammar(g)
                }
                Input::Ext(eg) => {
                    let report = validate_ext(eg);
                    if !report.is_valid() {
                        return Err(report.to_string());
                    }
                    eg.clone()
                }
            };
            let limits = EnumLimits::default();
            match kind {
                EnumKind::Trees => {
                    let ts = hog::semantics::enumerate_trees_ext(&eg, budget, limits);
                    for t in &ts.trees {
                        println!("{t}");
                    }
                    if ts.truncated {
                        eprintln!("warning: enumeration truncated");
                    }
                }
                EnumKind::Words => {
                    let g = match input {
                        Input::Plain(g) => g,
                        Input::Ext(eg) => desugar(&eg),
                    };
                    let ws = word_language_slice(&g, budget, max_len, limits)
                        .map_err(|e| e.to_string())?;
                    for w in &ws.words {
                        println!("{w}");
                    }
                    if ws.truncated {
                        eprintln!("warning: enumeration truncated");
                    }
                }
                EnumKind::Frontier | EnumKind::Le => {
                    let fs = hog::semantics::frontier_slice_ext(&eg, budget, limits);
                    let words = match kind {
                        EnumKind::Frontier => fs.words,
                        _ => hog::semantics::le_epsilon(&fs.words),
                    };
                    for w in &words {
                        println!("{w}");
                    }
                    if fs.truncated {
                        eprintln!("warning: enumeration truncated");
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Transform {
            file,
            stage,
            no_prune,
            trace,
            output,
            keep_stages,
        } => {
            let input = read_input(&file)?;
            let prune = !no_prune;
            let step1_opts = Step1Options {
                prune,
                trace,
                cap: 20_000,
            };
            let step2_opts = Step2Options { prune, cap: 20_000 };

            // An %extended input to the desugar stage desugars directly.
            if matches!(stage, Stage::Desugar) {
                if let Input::Ext(eg) = &input {
                    let report = validate_ext(eg);
                    if !report.is_valid() {
                        return Err(report.to_string());
                    }
                    let g = desugar(eg);
                    return emit(&print_grammar(&g), output.as_deref()).map(|_| EXIT_OK);
                }
            }
            let g = match input {
                Input::Plain(g) => g,
                Input::Ext(eg) => {
                    let report = validate_ext(&eg);
                    if !report.is_valid() {
                        return Err(report.to_string());
                    }
                    desugar(&eg)
                }
            };
            check_valid(&g)?;

            let mut stages: Vec<(&'static str, String)> = Vec::new();
            let result: String = if is_word_grammar(&g) {
                let pre = normalize_order0_args(&g).map_err(|e| e.to_string())?;
                stages.push(("pre", print_grammar(&pre)));
                match stage {
                    Stage::Pre => print_grammar(&pre),
                    Stage::Step1 | Stage::Desugar | Stage::Step2 | Stage::All => {
                        let out1 =
                            transform_grammar1(&pre, &step1_opts).map_err(|e| e.to_string())?;
                        if trace {
                            for (lhs, body, deriv) in &out1.traces {
                                println!("# derivation for {lhs} = {body}");
                                print!("{}", deriv.render());
                            }
                        }
                        stages.push(("step1", print_ext_grammar(&out1.grammar)));
                        match stage {
                            Stage::Step1 => print_ext_grammar(&out1.grammar),
                            _ => {
                                let plain1 = desugar(&out1.grammar);
                                stages.push(("desugar1", print_grammar(&plain1)));
                                match stage {
                                    Stage::Desugar => print_grammar(&plain1),
                                    _ => {
                                        let sat = saturate_br(&plain1);
                                        stages.push(("saturate", print_grammar(&sat)));
                                        let out2 = transform_grammar2(&sat, &step2_opts)
                                            .map_err(|e| e.to_string())?;
                                        stages.push(("step2", print_ext_grammar(&out2)));
                                        match stage {
                                            Stage::Step2 => print_ext_grammar(&out2),
                                            _ => {
                                                let final_g = desugar(&out2);
                                                stages
                                                    .push(("desugar2", print_grammar(&final_g)));
                                                print_grammar(&final_g)
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            } else {
                // tree-shaped input: only the e-elimination applies
                match stage {
                    Stage::Pre | Stage::Step1 => {
                        return Err(
                            "this stage needs a word grammar (all terminals unary except e)"
                                .to_string(),
                        )
                    }
                    Stage::Desugar => print_grammar(&g),
                    Stage::Step2 | Stage::All => {
                        let sat = saturate_br(&g);
                        stages.push(("saturate", print_grammar(&sat)));
                        let out2 =
                            transform_grammar2(&sat, &step2_opts).map_err(|e| e.to_string())?;
                        stages.push(("step2", print_ext_grammar(&out2)));
                        match stage {
                            Stage::Step2 => print_ext_grammar(&out2),
                            _ => {
                                let final_g = desugar(&out2);
                                stages.push(("desugar2", print_grammar(&final_g)));
                                print_grammar(&final_g)
                            }
                        }
                    }
                }
            };

            if let Some(dir) = keep_stages {
                fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
                for (i, (name, text)) in stages.iter().enumerate() {
                    let path = dir.join(format!("stage{i}_{name}.hog"));
                    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
                }
            }
            emit(&result, output.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Converse { file, output } => {
            let g = read_plain(&file)?;
            check_valid(&g)?;
            let bad = words_with_e(&g, 10, EnumLimits::default());
            if !bad.is_empty() {
                eprintln!(
                    "warning: the frontier slice contains e-words (e.g. {}); the word language will differ on them",
                    bad.iter().next().unwrap()
                );
            }
            let out = tree_to_word(&g).map_err(|e| e.to_string())?;
            debug_assert!(order_bound_check(&g, &out));
            emit(&print_grammar(&out), output.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            file,
            file2,
            max_len,
            budget,
            budget_hi,
            json,
        } => {
            let params = OracleParams {
                max_len,
                budget,
                budget_hi: budget_hi.unwrap_or_else(|| default_budget_hi(budget)),
                limits: EnumLimits::default(),
            };
            let ga = read_plain(&file)?;
            check_valid(&ga)?;
            let report = match file2 {
                Some(f2) => {
                    let gb = read_plain(&f2)?;
                    check_valid(&gb)?;
                    let ka = side_kind(&ga);
                    let kb = side_kind(&gb);
                    compare_word_slices(&ga, ka, &gb, kb, &params)
                }
                None => {
                    if !is_word_grammar(&ga) {
                        return Err("pipeline verification needs a word grammar".to_string());
                    }
                    let run = pipeline_opts(&ga, &PipelineOptions::standard())
                        .map_err(|e| e.to_string())?;
                    compare_word_slices(
                        &ga,
                        LangKind::Word,
                        &run.output,
                        LangKind::LeafEpsilon,
                        &params,
                    )
                }
            };
            if json {
                println!("{}", report.to_jsonl());
            } else {
                print!("{report}");
            }
            Ok(match report.verdict {
                Verdict::Pass => EXIT_OK,
                Verdict::Fail => EXIT_VERIFY_FAIL,
                Verdict::Inconclusive => EXIT_INCONCLUSIVE,
            })
        }
    }
}

fn side_kind(g: &Grammar) -> LangKind {
    if is_word_grammar(g) {
        LangKind::Word
    } else {
        LangKind::LeafEpsilon
    }
}
