use gramlog::dictionary::NGramDictionary;
use gramlog::eval::{load_labeled, parsing_accuracy, read_all};
use gramlog::output::CsvSink;
use gramlog::parallel::{offline_bytes, parse_bytes, OfflineOptions};
use gramlog::parser::ParsedMessage;
use gramlog::streaming::{agreement_ratio, parse_online, OnlineConfig};
use gramlog::synth::{self, EventOrder, SynthSpec};

fn log(spec: SynthSpec, n: u64) -> (Vec<u8>, Vec<synth::SynthLine>) {
    let lines = synth::generate(spec, n);
    let data = lines.iter().flat_map(|l| format!("{}\n", l.line).into_bytes()).collect();
    (data, lines)
}

fn csv(parsed: &[ParsedMessage]) -> Vec<u8> {
    let mut sink = CsvSink::new(Vec::new()).unwrap();
    sink.write_all(parsed).unwrap();
    sink.finish().unwrap()
}

#[test]
fn worker_count_does_not_change_output() {
    let (data, _) = log(SynthSpec::default(), 6000);
    let cfg = synth::dataset_config();
    let one = offline_bytes(&data, &cfg, &OfflineOptions::default()).unwrap();
    for workers in [2, 3, 7] {
        let many = offline_bytes(&data, &cfg, &OfflineOptions { workers, ..Default::default() }).unwrap();
        assert_eq!(many.thresholds, one.thresholds);
        assert_eq!(many.dict, one.dict);
        assert_eq!(csv(&many.parsed), csv(&one.parsed), "workers={workers}");
    }
}

#[test]
fn saved_dictionary_parses_identically() {
    let (data, _) = log(SynthSpec { seed: 3, ..Default::default() }, 3000);
    let cfg = synth::dataset_config();
    let run = offline_bytes(&data, &cfg, &OfflineOptions::default()).unwrap();
    let mut saved = Vec::new();
    run.dict.save(&mut saved).unwrap();
    let dict = NGramDictionary::load(saved.as_slice()).unwrap();
    assert_eq!(dict, run.dict);
    let parsed = parse_bytes(&data, &cfg, &dict, run.thresholds, Default::default(), 2).unwrap();
    assert_eq!(csv(&parsed), csv(&run.parsed));
}

#[test]
fn online_converges_to_offline_on_repetitive_log() {
    let spec = SynthSpec { templates: 12, order: EventOrder::CYCLE, ..Default::default() };
    let (data, _) = log(spec, 20_000);
    let cfg = synth::dataset_config();
    let offline = offline_bytes(&data, &cfg, &OfflineOptions::default()).unwrap();
    let (online, state) = parse_online(read_all(&data, &cfg).unwrap(), OnlineConfig::default());
    assert_eq!(online.len(), offline.parsed.len());
    assert_eq!(state.dictionary(), &offline.dict);
    let agreement = agreement_ratio(&online, &offline.parsed).unwrap();
    assert!(agreement >= 0.99, "{agreement}");
}

#[test]
fn accuracy_against_generated_truth() {
    let spec = SynthSpec { templates: 10, order: EventOrder::CYCLE, ..Default::default() };
    let (data, lines) = log(spec, 4000);
    let mut truth = Vec::new();
    synth::write_structured(&mut truth, &lines).unwrap();
    let truth = load_labeled(truth.as_slice()).unwrap();
    let parsed = offline_bytes(&data, &synth::dataset_config(), &OfflineOptions::default()).unwrap().parsed;
    let report = parsing_accuracy("Synthetic", &parsed, &truth).unwrap();
    assert_eq!(report.total, 4000);
    assert_eq!(report.correct + report.mismatches.len(), report.total);
    assert!(report.parsing_accuracy > 0.0 && report.parsing_accuracy <= 1.0);
    let mut audit = Vec::new();
    report.write_mismatches(&mut audit).unwrap();
    assert_eq!(String::from_utf8(audit).unwrap().lines().count(), report.mismatches.len() + 1);
}
