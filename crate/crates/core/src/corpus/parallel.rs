use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{CorpusError, Dataset, ParallelCorpus};

/// Aligns language partitions of one task by example id.
///
/// Only ids present in every partition are kept, in the order of the first
/// dataset. Dropped ids are logged and returned alongside the corpus; they
/// are not an error because only quality scoring needs parallel data.
pub fn build_parallel(
    datasets: Vec<Dataset>,
) -> Result<(ParallelCorpus, Vec<String>), CorpusError> {
    let first = datasets.first().ok_or(CorpusError::NoDatasets)?;
    let task = first.task;
    let mut langs = HashSet::new();
    for ds in &datasets {
        if ds.task != task {
            return Err(CorpusError::TaskMismatch(task, ds.task));
        }
        if !langs.insert(ds.language) {
            return Err(CorpusError::DuplicateLanguage(ds.language));
        }
    }

    let id_sets: Vec<HashSet<&str>> = datasets.iter().map(|ds| ds.ids().collect()).collect();
    let shared: Vec<String> = first
        .ids()
        .filter(|id| id_sets.iter().all(|set| set.contains(id)))
        .map(str::to_owned)
        .collect();
    if shared.is_empty() {
        return Err(CorpusError::EmptyIntersection);
    }
    let shared_set: HashSet<&str> = shared.iter().map(String::as_str).collect();
    let dropped: Vec<String> = datasets
        .iter()
        .flat_map(|ds| ds.ids())
        .filter(|id| !shared_set.contains(id))
        .map(str::to_owned)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut per_language = BTreeMap::new();
    for ds in &datasets {
        let by_id: std::collections::HashMap<&str, _> =
            ds.examples.iter().map(|e| (e.id.as_str(), e)).collect();
        let examples = shared.iter().map(|id| by_id[id.as_str()].clone()).collect();
        per_language.insert(
            ds.language,
            Dataset {
                task,
                language: ds.language,
                examples,
                source_name: ds.source_name.clone(),
            },
        );
    }

    let reference = &per_language[&first.language];
    for ds in per_language.values() {
        for (a, b) in reference.examples.iter().zip(&ds.examples) {
            if a.gold != b.gold {
                return Err(CorpusError::GoldDisagreement(a.id.clone()));
            }
        }
    }

    if !dropped.is_empty() {
        log::warn!(
            "{task}: dropped {} id(s) not present in every language: {}",
            dropped.len(),
            dropped.join(", ")
        );
    }
    Ok((ParallelCorpus { task, per_language }, dropped))
}
