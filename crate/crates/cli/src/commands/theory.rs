use llc_core::{dln_lambda, DlnSignature, Result};

pub struct TheoryOutput {
    pub lambda: f64,
    pub signature: DlnSignature,
}

pub fn run(widths: &[usize], rank: usize) -> Result<TheoryOutput> {
    let (lambda, signature) = dln_lambda(widths, rank)?;
    Ok(TheoryOutput { lambda, signature })
}

pub fn print(out: &TheoryOutput) {
    let sig = &out.signature;
    println!("widths          {:?}", sig.widths);
    println!("rank            {}", sig.rank);
    println!("parameter count {}", sig.param_count());
    println!("deficiencies    {:?}", sig.deltas);
    println!("sigma set       {:?} (ell = {}, a = {})", sig.sigma, sig.ell, sig.a);
    println!("lambda          {}", out.lambda);
    println!("d/2 bound       {}", sig.param_count() as f64 / 2.0);
}
