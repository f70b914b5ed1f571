//! Minimal YUV4MPEG2 reader that keeps the luma plane only.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::Grid;

pub struct Y4mReader {
    path: PathBuf,
    reader: BufReader<File>,
    width: usize,
    height: usize,
    chroma_bytes: usize,
    line: Vec<u8>,
}

impl Y4mReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Ingestion {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = BufReader::new(file);
        let mut header = Vec::new();
        reader
            .read_until(b'\n', &mut header)
            .map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8_lossy(&header);
        let mut fields = text.trim_end().split(' ');
        if fields.next() != Some("YUV4MPEG2") {
            return Err(Error::Format(format!("{}: not a Y4M stream", path.display())));
        }
        let (mut width, mut height, mut colorspace) = (None, None, "420");
        for field in fields {
            let (tag, value) = field.split_at(field.len().min(1));
            match tag {
                "W" => width = value.parse::<usize>().ok(),
                "H" => height = value.parse::<usize>().ok(),
                "C" => colorspace = value,
                _ => {}
            }
        }
        let (width, height) = width.zip(height).ok_or_else(|| {
            Error::Format(format!("{}: Y4M header lacks W/H", path.display()))
        })?;
        let half_w = width.div_ceil(2);
        let half_h = height.div_ceil(2);
        let chroma_bytes = match colorspace {
            c if c.starts_with("420") => 2 * half_w * half_h,
            "422" => 2 * half_w * height,
            "444" => 2 * width * height,
            "mono" => 0,
            other => {
                return Err(Error::Format(format!(
                    "{}: unsupported Y4M colorspace C{other}",
                    path.display()
                )))
            }
        };
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            width,
            height,
            chroma_bytes,
            line: Vec::new(),
        })
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Returns the next luma plane, or `None` at end of stream.
    pub fn next_luma(&mut self) -> Result<Option<Grid<u8>>> {
        self.line.clear();
        let n = self
            .reader
            .read_until(b'\n', &mut self.line)
            .map_err(|e| Error::io(&self.path, e))?;
        if n == 0 {
            return Ok(None);
        }
        if !self.line.starts_with(b"FRAME") {
            return Err(Error::Format(format!(
                "{}: expected FRAME marker",
                self.path.display()
            )));
        }
        let mut luma = vec![0u8; self.width * self.height];
        self.reader
            .read_exact(&mut luma)
            .map_err(|_| Error::Format(format!("{}: truncated Y4M frame", self.path.display())))?;
        let mut skip = self.chroma_bytes as u64;
        if skip > 0 {
            let copied = std::io::copy(
                &mut (&mut self.reader).take(skip),
                &mut std::io::sink(),
            )
            .map_err(|e| Error::io(&self.path, e))?;
            skip -= copied;
            if skip != 0 {
                return Err(Error::Format(format!(
                    "{}: truncated Y4M chroma",
                    self.path.display()
                )));
            }
        }
        Ok(Some(
            Grid::from_vec(self.width, self.height, luma).expect("sized above"),
        ))
    }
}
