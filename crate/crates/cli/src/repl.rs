//! Line-oriented request loop over stdin.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};

use ofdma_agent::{
    apply_mask, generate_channel, matrix_io, run_workflow, CsiInput, MaskedChannelMatrix,
    RuleTable, ScenarioConfig,
};

const HELP: &str = "\
commands:
  <request>            recognize the request and run the workflow
  set <key> <value>    change a config key (e.g. `set Rmin 1e6`, `set pmax 10`)
  reload-csi [path]    re-read the CSI file, or redraw the synthetic one
  show                 print the current config and CSI shape
  help                 this text
  quit                 leave";

struct Session {
    cfg: ScenarioConfig,
    rules: RuleTable,
    csi_path: Option<PathBuf>,
    csi: MaskedChannelMatrix,
}

impl Session {
    fn load_csi(cfg: &ScenarioConfig, path: Option<&PathBuf>) -> Result<MaskedChannelMatrix> {
        match path {
            Some(p) => Ok(matrix_io::read_masked(p)
                .with_context(|| format!("reading {}", p.display()))?
                .0),
            None => {
                let truth = generate_channel(cfg)?;
                Ok(apply_mask(&truth, cfg.loss_rate, cfg.seed)?)
            }
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut json: serde_json::Value = serde_json::from_str(&self.cfg.to_json_string())?;
        let obj = json
            .as_object_mut()
            .expect("config serializes to an object");
        let wanted = normalize(key);
        let name = obj
            .keys()
            .chain(["repair_max_iters".to_string()].iter())
            .find(|k| normalize(k) == wanted)
            .cloned()
            .ok_or_else(|| anyhow!("unknown config key `{key}`"))?;
        let parsed = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        obj.insert(name, parsed);
        let cfg = ScenarioConfig::from_json_str(&json.to_string())?;
        if self.csi_path.is_none() {
            self.csi = Self::load_csi(&cfg, None)?;
        }
        self.cfg = cfg;
        Ok(())
    }

    fn ask(&self, query: &str) -> Result<String> {
        let intent = self.rules.parse_intent(query)?;
        let result = run_workflow(&CsiInput::Masked(self.csi.clone()), &intent, &self.cfg)?;
        Ok(serde_json::to_string_pretty(&result.to_json_value(false))?)
    }

    fn handle(&mut self, line: &str) -> Result<Option<String>> {
        let mut parts = line.splitn(2, char::is_whitespace);
        let head = parts.next().unwrap_or_default();
        let rest = parts.next().unwrap_or_default().trim();
        match head {
            "help" => Ok(Some(HELP.to_string())),
            "show" => Ok(Some(format!(
                "{}\ncsi: {}x{}, {} missing",
                self.cfg.to_json_string(),
                self.csi.users(),
                self.csi.subcarriers(),
                self.csi.missing_count()
            ))),
            "set" => {
                let mut kv = rest.split_whitespace();
                let (Some(k), Some(v), None) = (kv.next(), kv.next(), kv.next()) else {
                    bail!("usage: set <key> <value>");
                };
                self.set(k, v)?;
                Ok(Some(format!("ok: {k} = {v}")))
            }
            "reload-csi" => {
                if !rest.is_empty() {
                    self.csi_path = Some(PathBuf::from(rest));
                }
                self.csi = Self::load_csi(&self.cfg, self.csi_path.as_ref())?;
                Ok(Some(format!(
                    "csi: {}x{}, {} missing",
                    self.csi.users(),
                    self.csi.subcarriers(),
                    self.csi.missing_count()
                )))
            }
            _ => self.ask(line).map(Some),
        }
    }
}

fn normalize(key: &str) -> String {
    key.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

pub fn run(cfg: ScenarioConfig, rules: RuleTable, csi_path: Option<PathBuf>) -> Result<()> {
    let csi = Session::load_csi(&cfg, csi_path.as_ref())?;
    let mut session = Session {
        cfg,
        rules,
        csi_path,
        csi,
    };
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    let interactive = std::io::IsTerminal::is_terminal(&stdin);
    if interactive {
        println!("type `help` for commands");
    }
    let mut lines = stdin.lock().lines();
    loop {
        if interactive {
            print!("> ");
            stdout.flush()?;
        }
        let Some(line) = lines.next() else { break };
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if matches!(line, "quit" | "exit") {
            break;
        }
        match session.handle(line) {
            Ok(Some(text)) => println!("{text}"),
            Ok(None) => {}
            Err(err) => println!("error: {err:#}"),
        }
    }
    Ok(())
}
