//! Synthetic clone corpus. Every template is one small function written two
//! ways; variants are derived from it by layout changes, renaming, literal
//! changes, statement insertion and reordering, or by switching to the
//! alternative implementation. Two variants of the same template form a
//! clone pair whose type is the stronger of the two transformations.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::numcore::Rng;

use super::dataset::{CloneType, ClonePair, Dataset};
use super::PipelineError;

/// Template source syntax: `$name` is a renameable identifier, `@(a|b)` a
/// literal with alternatives (the first is the original), and a line
/// holding only `~` marks a point where extra statements may go.
struct Template {
    name: &'static str,
    main: &'static str,
    alt: &'static str,
}

const TEMPLATES: [Template; 8] = [
    Template {
        name: "array_sum",
        main: "int $sum(int[] $a) {
    int $s = 0;
    ~
    for (int $i = 0; $i < $a.length; $i++) {
        $s += $a[$i];
    }
    ~
    return $s;
}",
        alt: "int $sum(int[] $a) {
    int $s = 0;
    int $i = 0;
    ~
    while ($i < $a.length) {
        $s = $s + $a[$i];
        $i = $i + 1;
    }
    ~
    return $s;
}",
    },
    Template {
        name: "max_search",
        main: "int $max(int[] $a) {
    int $m = $a[0];
    ~
    for (int $i = 1; $i < $a.length; $i++) {
        if ($a[$i] > $m) {
            $m = $a[$i];
        }
    }
    ~
    return $m;
}",
        alt: "int $max(int[] $a) {
    int $b = 0;
    ~
    for (int $i = 0; $i < $a.length; $i++) {
        $b = $a[$i] > $a[$b] ? $i : $b;
    }
    ~
    return $a[$b];
}",
    },
    Template {
        name: "string_reverse",
        main: "String $reverse(String $s) {
    String $r = \"\";
    ~
    for (int $i = $s.length() - 1; $i >= 0; $i--) {
        $r = $r + $s.charAt($i);
    }
    ~
    return $r;
}",
        alt: "String $reverse(String $s) {
    char[] $c = $s.toCharArray();
    int $lo = 0;
    int $hi = $c.length - 1;
    ~
    while ($lo < $hi) {
        char $t = $c[$lo];
        $c[$lo] = $c[$hi];
        $c[$hi] = $t;
        $lo++;
        $hi--;
    }
    ~
    return new String($c);
}",
    },
    Template {
        name: "gcd",
        main: "int $gcd(int $a, int $b) {
    ~
    while ($b != 0) {
        int $t = $b;
        $b = $a % $b;
        $a = $t;
    }
    ~
    return $a;
}",
        alt: "int $gcd(int $a, int $b) {
    ~
    while ($a != $b) {
        if ($a > $b) {
            $a = $a - $b;
        } else {
            $b = $b - $a;
        }
    }
    ~
    return $a;
}",
    },
    Template {
        name: "bubble_sort",
        main: "void $sort(int[] $a) {
    int $n = $a.length;
    ~
    for (int $i = 0; $i < $n - 1; $i++) {
        for (int $j = 0; $j < $n - $i - 1; $j++) {
            if ($a[$j] > $a[$j + 1]) {
                int $t = $a[$j];
                $a[$j] = $a[$j + 1];
                $a[$j + 1] = $t;
            }
        }
    }
    ~
}",
        alt: "void $sort(int[] $a) {
    boolean $w = true;
    ~
    while ($w) {
        $w = false;
        for (int $j = 1; $j < $a.length; $j++) {
            if ($a[$j - 1] > $a[$j]) {
                int $t = $a[$j];
                $a[$j] = $a[$j - 1];
                $a[$j - 1] = $t;
                $w = true;
            }
        }
    }
    ~
}",
    },
    Template {
        name: "factorial",
        main: "long $fact(int $n) {
    long $r = 1;
    ~
    for (int $i = @(2|1|2); $i <= $n; $i++) {
        $r = $r * $i;
    }
    ~
    return $r;
}",
        alt: "long $fact(int $n) {
    ~
    if ($n <= 1) {
        return 1;
    }
    ~
    return $n * $fact($n - 1);
}",
    },
    Template {
        name: "linear_search",
        main: "int $find(int[] $a, int $k) {
    ~
    for (int $i = 0; $i < $a.length; $i++) {
        if ($a[$i] == $k) {
            return $i;
        }
    }
    ~
    return @(-1|-2|-100);
}",
        alt: "int $find(int[] $a, int $k) {
    int $p = @(-1|-2|-100);
    int $i = 0;
    ~
    while ($i < $a.length) {
        if ($a[$i] == $k) {
            $p = $i;
            break;
        }
        $i++;
    }
    ~
    return $p;
}",
    },
    Template {
        name: "counting_loop",
        main: "int $count(int[] $a) {
    int $c = 0;
    ~
    for (int $i = 0; $i < $a.length; $i++) {
        if ($a[$i] % @(2|3|5) == 0) {
            $c++;
        }
    }
    ~
    return $c;
}",
        alt: "int $count(int[] $a) {
    int $c = 0;
    int $i = 0;
    ~
    while ($i < $a.length) {
        switch ($a[$i] % @(2|3|5)) {
            case 0:
                $c = $c + 1;
                break;
            default:
                break;
        }
        $i++;
    }
    ~
    return $c;
}",
    },
];

/// Statements that can be inserted anywhere a `~` marker allows; `$u` is
/// replaced by a fresh name.
const FILLERS: [&str; 8] = [
    "int $u = 0;",
    "System.out.println(\"trace\");",
    "boolean $u = false;",
    "String $u = \"tmp\";",
    "int $u = 1;\n$u = $u * 2;",
    "long $u = 0;",
    "System.out.println(\"step\");",
    "int $u = 7;\nif ($u > 3) {\n    $u = 3;\n}",
];

const NAME_POOL: [&str; 48] = [
    "arr", "data", "nums", "values", "items", "xs", "input", "buf", "elems", "vec", "list", "tbl",
    "acc", "total", "res", "out", "val", "cur", "tmp", "aux", "best", "pos", "idx", "k0", "j1",
    "cnt", "num", "len", "lim", "hi2", "lo2", "flag", "done", "swapped", "key", "target", "needle",
    "result", "answer", "prod", "calc", "compute", "work", "process", "helper", "run", "apply",
    "eval",
];

/// Variant plan for one template: index 0 is the unmodified original.
pub const VARIANT_TYPES: [CloneType; 16] = [
    CloneType::T1,
    CloneType::T1,
    CloneType::T1,
    CloneType::T2,
    CloneType::T2,
    CloneType::T2,
    CloneType::VST3,
    CloneType::VST3,
    CloneType::VST3,
    CloneType::ST3,
    CloneType::ST3,
    CloneType::ST3,
    CloneType::MT3,
    CloneType::MT3,
    CloneType::MT3,
    CloneType::WT3T4,
];

#[derive(Clone, Debug)]
pub struct ToyFragment {
    pub id: String,
    pub template: &'static str,
    pub clone_type: CloneType,
    pub source: String,
}

#[derive(Clone, Debug)]
pub struct ToyCorpus {
    pub fragments: Vec<ToyFragment>,
    pub pairs: Vec<ClonePair>,
}

pub fn template_names() -> Vec<&'static str> {
    TEMPLATES.iter().map(|t| t.name).collect()
}

fn placeholder_names(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let b = src.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'$' {
            let start = i + 1;
            let mut j = start;
            while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_') {
                j += 1;
            }
            let name = src[start..j].to_string();
            if !out.contains(&name) {
                out.push(name);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

fn substitute_names(src: &str, map: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(src.len());
    let mut rest = src;
    while let Some(pos) = rest.find('$') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 1..];
        let end = tail
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(tail.len());
        out.push_str(&map[&tail[..end]]);
        rest = &tail[end..];
    }
    out.push_str(rest);
    out
}

fn substitute_literals(src: &str, rng: Option<&mut Rng>) -> String {
    let mut rng = rng;
    let mut out = String::with_capacity(src.len());
    let mut rest = src;
    while let Some(pos) = rest.find("@(") {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 2..];
        let end = tail.find(')').expect("unterminated literal choice");
        let options: Vec<&str> = tail[..end].split('|').collect();
        let pick = match rng.as_deref_mut() {
            Some(r) => options[r.below(options.len())],
            None => options[0],
        };
        out.push_str(pick);
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    out
}

fn indent_of(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

/// Replaces `~` markers with `count` filler statements at random markers.
fn insert_fillers(src: &str, count: usize, rng: &mut Rng) -> String {
    let lines: Vec<&str> = src.lines().collect();
    let markers: Vec<usize> = (0..lines.len()).filter(|&i| lines[i].trim() == "~").collect();
    let mut chosen: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for k in 0..count {
        let at = markers[rng.below(markers.len())];
        let filler = FILLERS[rng.below(FILLERS.len())].replace("$u", &format!("$extra{k}"));
        chosen.entry(at).or_default().push(filler);
    }
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim() == "~" {
            for f in chosen.get(&i).into_iter().flatten() {
                for fl in f.lines() {
                    out.push(format!("{}{}", indent_of(line), fl));
                }
            }
        } else {
            out.push(line.to_string());
        }
    }
    out.join("\n")
}

const MOVABLE_PREFIXES: [&str; 6] = ["int ", "long ", "boolean ", "String ", "char[] ", "System.out"];

/// Name declared by a movable line, if any.
fn declared(line: &str) -> Option<&str> {
    let t = line.trim();
    let rest = t.split_once(' ')?.1;
    rest.starts_with('$').then(|| rest.split(' ').next().unwrap_or(rest))
}

fn movable(line: &str) -> bool {
    let t = line.trim();
    indent_of(line).len() == 4 && t.ends_with(';') && MOVABLE_PREFIXES.iter().any(|p| t.starts_with(p))
}

/// Swaps one pair of adjacent top-level declarations or print statements
/// that do not refer to each other.
fn reorder(src: &str, rng: &mut Rng) -> String {
    let mut lines: Vec<String> = src.lines().map(str::to_string).collect();
    let independent = |a: &str, b: &str| {
        declared(a).is_none_or(|n| !b.contains(n)) && declared(b).is_none_or(|n| !a.contains(n))
    };
    let candidates: Vec<usize> = (0..lines.len().saturating_sub(1))
        .filter(|&i| movable(&lines[i]) && movable(&lines[i + 1]) && independent(&lines[i], &lines[i + 1]))
        .collect();
    if !candidates.is_empty() {
        let i = candidates[rng.below(candidates.len())];
        lines.swap(i, i + 1);
    }
    lines.join("\n")
}

const COMMENTS: [&str; 5] = ["// helper", "// loop over input", "/* note */", "// TODO check bounds", "// result"];

/// Whitespace and comment changes only.
fn relayout(src: &str, rng: &mut Rng) -> String {
    let mut out = String::new();
    if rng.uniform() < 0.5 {
        out.push_str("/* generated */\n");
    }
    for line in src.lines() {
        let t = line.trim_start();
        let depth = (line.len() - t.len()) / 4;
        let unit = ["  ", "    ", "\t", "   "][rng.below(4)];
        if rng.uniform() < 0.2 {
            out.push_str(&unit.repeat(depth));
            out.push_str(COMMENTS[rng.below(COMMENTS.len())]);
            out.push('\n');
        }
        out.push_str(&unit.repeat(depth));
        let mut text = t.replace(" = ", if rng.uniform() < 0.5 { "=" } else { " = " });
        if rng.uniform() < 0.3 {
            text = text.replace("; ", ";  ");
        }
        out.push_str(&text);
        if rng.uniform() < 0.15 {
            out.push_str(" // ok");
        }
        out.push('\n');
        if rng.uniform() < 0.1 {
            out.push('\n');
        }
    }
    out
}

fn render_variant(t: &Template, kind: CloneType, original: bool, rng: &mut Rng) -> String {
    let form = if kind == CloneType::WT3T4 { t.alt } else { t.main };
    let insertions = match kind {
        CloneType::T1 | CloneType::T2 => 0,
        CloneType::VST3 => 1,
        CloneType::ST3 => 2,
        CloneType::MT3 => 3 + rng.below(2),
        CloneType::WT3T4 => rng.below(2),
    };
    let mut src = insert_fillers(form, insertions, rng);
    if kind == CloneType::MT3 {
        src = reorder(&src, rng);
    }
    let changed = !original && kind != CloneType::T1;
    src = substitute_literals(&src, if changed { Some(&mut *rng) } else { None });
    let names = placeholder_names(&src);
    let mut map = BTreeMap::new();
    if changed {
        let mut pool: Vec<&str> = NAME_POOL.to_vec();
        rng.shuffle(&mut pool);
        let mut fresh = pool.into_iter();
        for n in names {
            map.insert(n, fresh.next().expect("name pool is large enough").to_string());
        }
    } else {
        for n in names {
            map.insert(n.clone(), n);
        }
    }
    let src = substitute_names(&src, &map);
    if original {
        src + "\n"
    } else if matches!(kind, CloneType::T1 | CloneType::MT3) {
        relayout(&src, rng)
    } else {
        src + "\n"
    }
}

/// Builds the corpus: every template yields `VARIANT_TYPES.len()` variants;
/// all same-template pairs are clones, and an equal number of
/// cross-template pairs is sampled as non-clones.
pub fn generate(seed: u64) -> ToyCorpus {
    let mut fragments = Vec::new();
    for (ti, t) in TEMPLATES.iter().enumerate() {
        for (vi, &kind) in VARIANT_TYPES.iter().enumerate() {
            let mut rng = Rng::derived(seed, &[ti as u64, vi as u64]);
            fragments.push(ToyFragment {
                id: format!("{}_{vi:02}", t.name),
                template: t.name,
                clone_type: kind,
                source: render_variant(t, kind, vi == 0, &mut rng),
            });
        }
    }

    let mut clones = Vec::new();
    let mut others = Vec::new();
    for i in 0..fragments.len() {
        for j in i + 1..fragments.len() {
            let (a, b) = (&fragments[i], &fragments[j]);
            if a.template == b.template {
                clones.push(ClonePair {
                    id1: a.id.clone(),
                    id2: b.id.clone(),
                    label: true,
                    clone_type: Some(a.clone_type.max(b.clone_type)),
                });
            } else {
                others.push(ClonePair {
                    id1: a.id.clone(),
                    id2: b.id.clone(),
                    label: false,
                    clone_type: None,
                });
            }
        }
    }
    let mut rng = Rng::derived(seed, &[u64::MAX]);
    rng.shuffle(&mut others);
    others.truncate(clones.len());
    let mut pairs = clones;
    pairs.extend(others);
    rng.shuffle(&mut pairs);
    ToyCorpus { fragments, pairs }
}

impl ToyCorpus {
    pub fn to_dataset(&self) -> Result<Dataset, PipelineError> {
        Dataset::from_sources(
            self.fragments.iter().map(|f| (f.id.as_str(), f.source.as_str())),
            self.pairs.clone(),
        )
    }

    /// Writes `manifest.tsv`, `pairs.tsv` and `src/<id>.java` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), PipelineError> {
        let src_dir = dir.join("src");
        fs::create_dir_all(&src_dir).map_err(|e| PipelineError::io(&src_dir, e))?;
        let mut manifest = String::new();
        for f in &self.fragments {
            let rel = format!("src/{}.java", f.id);
            let path = dir.join(&rel);
            fs::write(&path, &f.source).map_err(|e| PipelineError::io(&path, e))?;
            manifest.push_str(&format!("{}\t{}\n", f.id, rel));
        }
        let mut pairs = String::new();
        for p in &self.pairs {
            pairs.push_str(&format!("{}\t{}\t{}", p.id1, p.id2, u8::from(p.label)));
            if let Some(t) = p.clone_type {
                pairs.push_str(&format!("\t{t}"));
            }
            pairs.push('\n');
        }
        for (name, text) in [("manifest.tsv", manifest), ("pairs.tsv", pairs)] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))?;
        }
        Ok(())
    }
}
