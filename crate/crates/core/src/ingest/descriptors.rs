use std::collections::BTreeMap;
use std::process::Command;

use super::IngestError;
use crate::store::StreetImage;

/// Images with fewer local descriptors than this are close-ups or blank
/// frames and are dropped.
pub const DEFAULT_MIN_DESCRIPTORS: u32 = 420;

/// Supplies the local-descriptor count of an image.
pub trait DescriptorCounter {
    fn count(&self, image: &StreetImage) -> Result<u32, IngestError>;
}

/// Counts already known from metadata, keyed by image id.
#[derive(Clone, Debug, Default)]
pub struct MetadataCounts(pub BTreeMap<String, u32>);

impl MetadataCounts {
    /// Collects the counts present on image records, e.g. from `images.jsonl`.
    pub fn from_images<'a>(images: impl IntoIterator<Item = &'a StreetImage>) -> Self {
        Self(
            images
                .into_iter()
                .filter_map(|i| i.descriptor_count.map(|c| (i.image_id.clone(), c)))
                .collect(),
        )
    }
}

impl DescriptorCounter for MetadataCounts {
    fn count(&self, image: &StreetImage) -> Result<u32, IngestError> {
        self.0
            .get(&image.image_id)
            .copied()
            .ok_or_else(|| IngestError::MissingDescriptorCount(image.image_id.clone()))
    }
}

/// Runs an external program per image and parses its stdout as the count.
///
/// Every `{uri}` in the argument list is replaced by the image URI.
#[derive(Clone, Debug)]
pub struct CommandCounter {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandCounter {
    /// Splits a pattern such as `sift-count --quiet {uri}` on whitespace.
    pub fn from_pattern(pattern: &str) -> Result<Self, IngestError> {
        let mut parts = pattern.split_whitespace().map(str::to_owned);
        let program = parts
            .next()
            .ok_or_else(|| IngestError::Config("empty descriptor-count command".into()))?;
        Ok(Self { program, args: parts.collect() })
    }
}

impl DescriptorCounter for CommandCounter {
    fn count(&self, image: &StreetImage) -> Result<u32, IngestError> {
        let fail = |message: String| IngestError::DescriptorCount { id: image.image_id.clone(), message };
        let output = Command::new(&self.program)
            .args(self.args.iter().map(|a| a.replace("{uri}", &image.uri)))
            .output()
            .map_err(|e| fail(format!("cannot run {}: {e}", self.program)))?;
        if !output.status.success() {
            return Err(fail(format!("{} exited with {}", self.program, output.status)));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        stdout.trim().parse().map_err(|_| fail(format!("unparseable output {:?}", stdout.trim())))
    }
}

/// Fills in `descriptor_count` on every image that lacks one.
pub fn assign_descriptor_counts(
    images: &mut [StreetImage],
    counter: &dyn DescriptorCounter,
) -> Result<(), IngestError> {
    for img in images.iter_mut().filter(|i| i.descriptor_count.is_none()) {
        img.descriptor_count = Some(counter.count(img)?);
    }
    Ok(())
}

/// Splits images into (kept, excluded) by descriptor count. The threshold
/// itself is kept.
pub fn filter_images(
    images: Vec<StreetImage>,
    min_descriptors: u32,
) -> Result<(Vec<StreetImage>, Vec<StreetImage>), IngestError> {
    if let Some(img) = images.iter().find(|i| i.descriptor_count.is_none()) {
        return Err(IngestError::MissingDescriptorCount(img.image_id.clone()));
    }
    Ok(images
        .into_iter()
        .partition(|i| i.descriptor_count.is_some_and(|c| c >= min_descriptors)))
}
