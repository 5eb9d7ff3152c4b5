use crate::model::{Layout, TensorBuf};

/// L1 intermediate buffer of a fused block: `rows x w x ch` int8 in one
/// layout. For the row-wise PW-DW scheme `base` is the padded intermediate
/// row currently held in buffer row 0.
#[derive(Clone, Debug)]
pub struct IntermediateBuffer {
    pub tensor: TensorBuf,
    pub base: usize,
}

impl IntermediateBuffer {
    pub fn new(rows: usize, w: usize, ch: usize, layout: Layout) -> Self {
        IntermediateBuffer { tensor: TensorBuf::zeros(rows, w, ch, layout), base: 0 }
    }

    pub fn bytes(&self) -> u64 {
        self.tensor.len() as u64
    }

    pub fn rows(&self) -> usize {
        self.tensor.h()
    }

    /// Zeroes buffer row `r` (a padding row).
    pub fn clear_row(&mut self, r: usize) {
        let (h, w, ch) = self.tensor.dims();
        let layout = self.tensor_layout();
        let data = self.tensor.data_mut();
        match layout {
            Layout::Hwc => data[r * w * ch..(r + 1) * w * ch].fill(0),
            Layout::Chw => {
                for c in 0..ch {
                    let o = (c * h + r) * w;
                    data[o..o + w].fill(0);
                }
            }
        }
    }

    fn tensor_layout(&self) -> Layout {
        self.tensor.layout()
    }

    /// Moves rows `from..from + rows` to the head of the buffer and advances
    /// `base` by `from`. Returns the bytes moved.
    pub fn shift(&mut self, from: usize, rows: usize) -> u64 {
        let (h, w, ch) = self.tensor.dims();
        assert!(from + rows <= h, "shift past the buffer end");
        let layout = self.tensor_layout();
        let data = self.tensor.data_mut();
        match layout {
            Layout::Hwc => data.copy_within(from * w * ch..(from + rows) * w * ch, 0),
            Layout::Chw => {
                for c in 0..ch {
                    let o = c * h * w;
                    data.copy_within(o + from * w..o + (from + rows) * w, o);
                }
            }
        }
        self.base += from;
        (rows * w * ch) as u64
    }
}
