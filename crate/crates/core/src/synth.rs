//! Synthetic labeled product names for desk-scale experiments.
//!
//! Each category owns a pool of keywords and a pool of attribute words
//! (varieties, processing, packaging) that no other category uses. A name is
//! an optional brand, one or two category keywords, an optional category
//! attribute, an optional descriptor and a package size. Pool words are drawn
//! with Zipf weights. Brands and sizes come from shared pools whose rank order
//! is rotated per category, so each category has its own favorites without
//! owning them. Descriptors are uniform. With probability `noise_rate` the
//! category words are replaced by descriptors, which makes the name
//! uninformative.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::write_atomic;
use crate::corpus::RawRecord;
use crate::error::{Error, Result};

/// `(label, keywords, attributes)`; all word pools are pairwise disjoint.
#[rustfmt::skip]
pub const CATEGORIES: [(&str, &[&str], &[&str]); 15] = [
    ("01.1.1 paine si cereale", &["paine", "franzela", "chifla", "bagheta", "faina", "orez", "paste", "spaghete", "fulgi", "cereale", "covrigi", "malai"], &["integrală", "secară", "tărâțe", "dospită", "crocantă", "graham", "maia", "semințe"]),
    ("01.1.2 carne", &["carne", "porc", "vita", "pui", "piept", "pulpe", "ceafa", "carnati", "salam", "sunca", "parizer", "mici"], &["afumat", "dezosat", "tocat", "marinat", "porționat", "măcelărie", "crud", "condimentat"]),
    ("01.1.3 peste", &["peste", "somon", "ton", "macrou", "hering", "pastrav", "crap", "sardine", "creveti", "calamar", "fileu", "cod"], &["oceanic", "sărat", "saramură", "conservă", "decongelat", "marin", "argintiu", "icre"]),
    ("01.1.4 lapte branza oua", &["lapte", "iaurt", "brânză", "telemea", "cașcaval", "smântână", "chefir", "ouă", "urdă", "mozzarella", "sana", "cremă"], &["pasteurizat", "degresat", "fermentat", "proaspăt", "vacă", "capră", "oaie", "bivoliță"]),
    ("01.1.5 uleiuri si grasimi", &["ulei", "unt", "margarina", "untura", "floarea", "rapita", "presat", "rafinat", "ghee", "seu", "măsline", "grăsime"], &["extravirgin", "nerafinat", "prăjire", "gătit", "vegetal", "omega", "canola", "soia"]),
    ("01.1.6 fructe", &["mere", "pere", "banane", "portocale", "struguri", "căpșuni", "lămâi", "kiwi", "ananas", "prune", "caise", "cireșe"], &["copt", "dulci", "import", "zemoase", "românești", "exotice", "galbene", "verzi"]),
    ("01.1.7 legume", &["roșii", "castraveți", "cartofi", "ceapă", "usturoi", "morcovi", "ardei", "varză", "salată", "vinete", "dovlecei", "fasole"], &["cultivat", "grădină", "sere", "câmp", "proaspete", "spălate", "curățate", "murate"]),
    ("01.1.8 zahar si dulciuri", &["zahăr", "ciocolată", "bomboane", "miere", "gem", "dulceață", "napolitane", "biscuiți", "halva", "rahat", "acadele", "praline"], &["umplutură", "alune", "glazură", "cremoasă", "fondantă", "caramel", "nuga", "zaharoasă"]),
    ("01.1.9 alte alimente", &["sare", "piper", "ketchup", "muștar", "maioneză", "boia", "oțet", "condimente", "supă", "sos", "drojdie", "vanilie"], &["iute", "picant", "pudră", "granulat", "deshidratat", "instant", "plic", "borcan"]),
    ("01.2.1 cafea ceai cacao", &["cafea", "espresso", "ceai", "cacao", "capsule", "boabe", "măcinată", "solubilă", "infuzie", "mușețel", "mentă", "cappuccino"], &["arabica", "robusta", "prăjită", "decofeinizată", "aromat", "plicuri", "intensă", "columbia"]),
    ("01.2.2 apa si racoritoare", &["apă", "minerală", "plată", "suc", "limonadă", "cola", "nectar", "sirop", "energizant", "tonic", "carbogazoasă", "izotonic"], &["izvor", "gazoasă", "necarbogazoasă", "îndulcită", "răcoritoare", "vitaminizată", "zero", "light"]),
    ("02.1.1 spirtoase", &["vodcă", "whisky", "coniac", "rom", "gin", "țuică", "pălincă", "lichior", "brandy", "tequila", "rachiu", "vermut"], &["alcool", "distilat", "învechit", "tărie", "baric", "scotch", "dublu", "grade"]),
    ("02.1.2 vin", &["vin", "feteasca", "merlot", "cabernet", "sauvignon", "riesling", "spumant", "șampanie", "prosecco", "tămâioasă", "muscat", "pinot"], &["sec", "demisec", "dulce", "roșu", "alb", "rose", "cules", "podgorie"]),
    ("02.1.3 bere", &["bere", "blondă", "brună", "nefiltrată", "pils", "lager", "ipa", "stout", "draught", "malț", "hamei", "radler"], &["halbă", "spumă", "artizanală", "pale", "ale", "craft", "amară", "tap"]),
    ("02.2.0 tutun", &["țigări", "tutun", "trabuc", "filtru", "foițe", "rezerve", "heets", "pipă", "țigarete", "cartuș", "slims", "mentolate"], &["nicotină", "pachet", "cutie", "king", "lungi", "subțiri", "clic", "arzător"]),
];

const BRANDS: &[&str] = &[
    "Bunătăți", "Agrosel", "Valea", "Montana", "Carpați", "Delta", "Olimp", "Codru", "Ceahlău",
    "Prahova", "Zarea", "Arin", "Mureș", "Siret", "Bucegi", "Gorj", "Vrancea", "Lotus", "Nordic",
    "Solaris",
];

const DESCRIPTORS: &[&str] = &[
    "promo", "nou", "extra", "premium", "bio", "clasic", "tradițional", "eco", "oferta", "family",
    "natural", "fresh", "selecție", "gold", "casa",
];

const SIZES: &[&str] = &[
    "500g", "1kg", "250g", "1l", "0.5l", "330ml", "750ml", "2l", "100g", "200g", "6x", "buc",
    "pet", "doza", "sticla", "bax", "400g", "150g",
];

/// Relative class sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Imbalance {
    Uniform,
    /// Linear weights from 1 down to 1/2.
    Mild,
    /// Geometric weights from 1 down to 1/5.
    Strong,
}

impl Imbalance {
    pub fn weights(self, classes: usize) -> Vec<f64> {
        let last = (classes - 1).max(1) as f64;
        (0..classes)
            .map(|c| match self {
                Imbalance::Uniform => 1.0,
                Imbalance::Mild => 1.0 - 0.5 * c as f64 / last,
                Imbalance::Strong => 5f64.powf(-(c as f64) / last),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub classes: usize,
    pub size: usize,
    pub seed: u64,
    pub noise_rate: f64,
    pub imbalance: Imbalance,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            classes: 15,
            size: 2500,
            seed: 1,
            noise_rate: 0.02,
            imbalance: Imbalance::Mild,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.classes > CATEGORIES.len() {
            return Err(Error::config(
                "classes",
                format!("must lie in 2..={}", CATEGORIES.len()),
            ));
        }
        if self.size < self.classes {
            return Err(Error::config("size", "must be at least the number of classes"));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::config("noise_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Records per class: largest-remainder apportionment of `size` by the
    /// imbalance weights, lower class first among equal remainders, with at
    /// least one record per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let w = self.imbalance.weights(self.classes);
        let spare = self.size - self.classes;
        let total: f64 = w.iter().sum();
        let quotas: Vec<f64> = w.iter().map(|x| spare as f64 * x / total).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..self.classes).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let left = spare - counts.iter().sum::<usize>();
        for &c in order.iter().take(left) {
            counts[c] += 1;
        }
        counts.iter().map(|c| c + 1).collect()
    }
}

pub fn category_label(class: usize) -> &'static str {
    CATEGORIES[class].0
}

/// Zipf draw over `pool` rotated left by `shift`: the word at rank `r` has
/// weight `1 / (r + 1)`.
fn zipf<'w>(pool: &[&'w str], shift: usize, rng: &mut ChaCha8Rng) -> &'w str {
    let total: f64 = (1..=pool.len()).map(|r| 1.0 / r as f64).sum();
    let mut u = rng.gen::<f64>() * total;
    let mut rank = pool.len() - 1;
    for r in 0..pool.len() {
        u -= 1.0 / (r + 1) as f64;
        if u < 0.0 {
            rank = r;
            break;
        }
    }
    pool[(rank + shift) % pool.len()]
}

fn product_name(class: usize, noisy: bool, rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<&str> = Vec::new();
    if rng.gen_bool(0.7) {
        words.push(zipf(BRANDS, class, rng));
    }
    let (_, keywords, attributes) = CATEGORIES[class];
    let n_key = 1 + usize::from(rng.gen_bool(0.5));
    let n_attr = usize::from(rng.gen_bool(0.7)) + usize::from(rng.gen_bool(0.3));
    for (pool, n) in [(keywords, n_key), (attributes, n_attr)] {
        let start = words.len();
        while words.len() < start + n {
            let w = if noisy { DESCRIPTORS.choose(rng).unwrap() } else { zipf(pool, 0, rng) };
            if !words[start..].contains(&w) {
                words.push(w);
            }
        }
    }
    if rng.gen_bool(0.5) {
        words.push(DESCRIPTORS.choose(rng).unwrap());
    }
    words.push(zipf(SIZES, class, rng));
    let mut name = words.join(" ");
    if let Some(first) = name.chars().next() {
        let upper: String = first.to_uppercase().collect();
        name.replace_range(..first.len_utf8(), &upper);
    }
    name
}

/// Deterministic per seed; records come in shuffled class order.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<RawRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut classes: Vec<usize> = spec
        .class_counts()
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();
    classes.shuffle(&mut rng);
    Ok(classes
        .into_iter()
        .map(|c| {
            let noisy = spec.noise_rate > 0.0 && rng.gen_bool(spec.noise_rate);
            RawRecord {
                text: product_name(c, noisy, &mut rng),
                label: category_label(c).to_string(),
            }
        })
        .collect())
}

/// CSV bytes with a `name,category` header.
pub fn to_csv(records: &[RawRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Data(format!("csv encoding failed: {e}"));
    w.write_record(["name", "category"]).map_err(err)?;
    for r in records {
        w.write_record([&r.text, &r.label]).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Data(format!("csv encoding failed: {e}")))
}

pub fn write_corpus(path: &Path, spec: &CorpusSpec) -> Result<usize> {
    let records = generate_corpus(spec)?;
    write_atomic(path, &to_csv(&records)?)?;
    Ok(records.len())
}
