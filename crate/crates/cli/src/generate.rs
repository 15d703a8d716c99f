use anyhow::Result;
use clap::{Subcommand, ValueEnum};
use serde_json::json;

use hamlearn::model::{self, CoeffLaw};
use hamlearn::seed::{rng_at, stream};

#[derive(clap::Args)]
pub struct Args {
    #[command(subcommand)]
    kind: Kind,
    /// Output path, `-` for stdout.
    #[arg(long, default_value = "-", global = true)]
    out: String,
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Law {
    /// Uniform on [-1, 1].
    Uniform,
    /// Magnitude uniform on [min, 1] with a random sign.
    Signed,
}

#[derive(Subcommand)]
enum Kind {
    /// M distinct random Paulis of weight 1..=k.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long = "M", alias = "m")]
        m: usize,
        #[arg(long, value_enum, default_value = "signed")]
        law: Law,
        /// Smallest magnitude for the signed law.
        #[arg(long, default_value_t = 0.1)]
        min: f64,
    },
    /// Sparse SY model: XX + YY + ZZ on randomly kept pairs.
    SparseSy {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// One random two-body term per site pair with power-law decay.
    PowerLaw {
        #[arg(long)]
        side: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
    },
}

pub fn instance_law(law: Law, min: f64) -> CoeffLaw {
    match law {
        Law::Uniform => CoeffLaw::Uniform,
        Law::Signed => CoeffLaw::SignedMagnitude { min },
    }
}

pub fn run(a: Args) -> Result<()> {
    let mut rng = rng_at(a.seed, &[stream::INSTANCE]);
    let version = env!("CARGO_PKG_VERSION");
    let (h, prov) = match a.kind {
        Kind::Random { n, k, m, law, min } => {
            let law = instance_law(law, min);
            let h = model::random_k_body(n, k, m, law, &mut rng)?;
            let prov = json!({"generator": "random", "n": n, "k": k, "M": m, "law": law, "seed": a.seed, "version": version});
            (h, prov)
        }
        Kind::SparseSy { n, p } => {
            let (h, xi) = model::sparse_sy(n, p, &mut rng)?;
            (h, json!({"generator": "sparse-sy", "n": n, "p": p, "scale": xi, "seed": a.seed, "version": version}))
        }
        Kind::PowerLaw { side, dim, alpha } => {
            let h = model::power_law(side, dim, alpha, &mut rng)?;
            let prov = json!({"generator": "power-law", "side": side, "dim": dim, "alpha": alpha, "seed": a.seed, "version": version});
            (h, prov)
        }
    };
    crate::write_output(&a.out, &h.to_json(Some(prov)))
}
