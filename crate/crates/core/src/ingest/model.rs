use super::Variant;
use crate::estimators::{GmmSpec, Weighting};
use crate::panel::{ModelSpec, Step, Term};

fn logged(name: &str, variable: &str, label: &str) -> Term {
    Term::new(name, variable, &[Step::Log]).with_label(label)
}

/// Log-linear gravity specification of each study panel, with table
/// labels. Exporter GDP is instrumented by its own first lag.
pub fn default_model_spec(variant: Variant) -> ModelSpec {
    let gdp_exporter = logged("lnprgdp", "gdp_exporter", "Peru's GDP");
    let mut regressors = vec![
        gdp_exporter.clone(),
        logged("lngdp", "gdp_importer", "Importer's GDP"),
    ];
    let dependent = match variant {
        Variant::Ctp => logged("lnexport", "trade_value", "Copper Exports"),
        _ => logged("lnexport", "trade_value", "Exports"),
    };
    match variant {
        Variant::Gmp | Variant::Rtp => {
            if variant == Variant::Gmp {
                regressors.push(logged(
                    "lnprgnipc",
                    "gnipc_exporter",
                    "Peru's per capita income",
                ));
                regressors.push(logged(
                    "lngnipc",
                    "gnipc_importer",
                    "Importer's per capita income",
                ));
            }
            regressors.extend([
                logged("lngdppcdiff", "gdppcdif", "GDP per capita difference"),
                logged("lnfx", "fx", "Real exchange rate"),
                logged("lndistance", "distance", "Distance"),
                Term::dummy("language", "language").with_label("Common official language"),
                Term::dummy("border", "border").with_label("Common border"),
                Term::dummy("apec", "apec").with_label("APEC"),
                Term::dummy("can", "can").with_label("CAN"),
                Term::dummy("mercosur", "mercosur").with_label("MERCOSUR"),
            ]);
        }
        Variant::Ctp => {
            regressors.extend([
                logged("lndistance", "distance", "Distance"),
                logged("lnfx", "fx", "Real exchange rate"),
                Term::dummy("language", "language").with_label("Common official language"),
                Term::dummy("border", "border").with_label("Common border"),
            ]);
            for (name, label) in [
                ("ind", "IND"),
                ("kor", "KOR"),
                ("chl", "CHL"),
                ("chn", "CHN"),
                ("usa", "USA"),
                ("eu", "EU"),
                ("jpn", "JPN"),
            ] {
                regressors.push(Term::dummy(name, name).with_label(label));
            }
            // lag applied after the log
            regressors.push(
                Term::new("ifl_lag2", "ifl", &[Step::Log, Step::Lag(2)]).with_label("IFL,lag=2"),
            );
        }
    }
    let mut spec = ModelSpec::new(dependent, regressors);
    spec.instruments = vec![gdp_exporter.lagged(1)];
    spec
}

/// Instrumentation matching [`default_model_spec`].
pub fn default_gmm_spec(_variant: Variant) -> GmmSpec {
    GmmSpec {
        endogenous: vec!["lnprgdp".into()],
        instruments: vec!["L1.lnprgdp".into()],
        weighting: Weighting::TwoStepRobust,
    }
}
