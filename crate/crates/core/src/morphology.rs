//! Binary morphology and connected-component filtering on row-major grids.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryGrid {
    pub cells: Vec<bool>,
    pub rows: usize,
    pub cols: usize,
}

impl BinaryGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            cells: vec![false; rows * cols],
            rows,
            cols,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.cells[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.cells[r * self.cols + c] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&v| v).count()
    }

    // Square structuring element applied as two 1-D passes. `fill` is the
    // value reported for a window containing any `fill` cell.
    fn square_pass(&self, radius: usize, fill: bool) -> BinaryGrid {
        if radius == 0 {
            return self.clone();
        }
        let mut horiz = BinaryGrid::new(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let lo = c.saturating_sub(radius);
                let hi = (c + radius).min(self.cols - 1);
                let hit = (lo..=hi).any(|cc| self.get(r, cc) == fill);
                horiz.set(r, c, if hit { fill } else { !fill });
            }
        }
        let mut out = BinaryGrid::new(self.rows, self.cols);
        for r in 0..self.rows {
            let lo = r.saturating_sub(radius);
            let hi = (r + radius).min(self.rows - 1);
            for c in 0..self.cols {
                let hit = (lo..=hi).any(|rr| horiz.get(rr, c) == fill);
                out.set(r, c, if hit { fill } else { !fill });
            }
        }
        out
    }

    /// Cells outside the grid are treated as unset.
    pub fn dilate(&self, radius: usize) -> BinaryGrid {
        self.square_pass(radius, true)
    }

    /// Cells outside the grid are ignored, so borders do not erode.
    pub fn erode(&self, radius: usize) -> BinaryGrid {
        self.square_pass(radius, false)
    }

    pub fn close(&self, radius: usize) -> BinaryGrid {
        self.dilate(radius).erode(radius)
    }

    pub fn open(&self, radius: usize) -> BinaryGrid {
        self.erode(radius).dilate(radius)
    }

    /// 8-connected component labels (0 = background) and component sizes,
    /// indexed by `label - 1`.
    pub fn components(&self) -> (Vec<u32>, Vec<usize>) {
        let mut labels = vec![0u32; self.cells.len()];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.cells.len() {
            if !self.cells[start] || labels[start] != 0 {
                continue;
            }
            let id = sizes.len() as u32 + 1;
            let mut size = 0;
            labels[start] = id;
            stack.push(start);
            while let Some(idx) = stack.pop() {
                size += 1;
                let (r, c) = (idx / self.cols, idx % self.cols);
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= self.rows as i64 || nc >= self.cols as i64 {
                            continue;
                        }
                        let n = nr as usize * self.cols + nc as usize;
                        if self.cells[n] && labels[n] == 0 {
                            labels[n] = id;
                            stack.push(n);
                        }
                    }
                }
            }
            sizes.push(size);
        }
        (labels, sizes)
    }

    pub fn remove_small_components(&self, min_size: usize) -> BinaryGrid {
        if min_size <= 1 {
            return self.clone();
        }
        let (labels, sizes) = self.components();
        BinaryGrid {
            cells: labels
                .iter()
                .map(|&l| l != 0 && sizes[l as usize - 1] >= min_size)
                .collect(),
            rows: self.rows,
            cols: self.cols,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&str]) -> BinaryGrid {
        let cols = rows[0].len();
        BinaryGrid {
            cells: rows.iter().flat_map(|r| r.chars().map(|c| c == '#')).collect(),
            rows: rows.len(),
            cols,
        }
    }

    #[test]
    fn dilate_and_erode_single_pixel() {
        let g = grid(&[".....", ".....", "..#..", ".....", "....."]);
        let d = g.dilate(1);
        assert_eq!(d, grid(&[".....", ".###.", ".###.", ".###.", "....."]));
        assert_eq!(d.erode(1), g);
        assert_eq!(g.erode(1).count(), 0);
    }

    #[test]
    fn border_does_not_erode_full_grid() {
        let g = grid(&["###", "###"]);
        assert_eq!(g.erode(2), g);
        assert_eq!(g.open(1), g);
    }

    #[test]
    fn close_fills_gap_open_removes_speck() {
        let g = grid(&["#######", "###.###", "#######"]);
        assert_eq!(g.close(1).count(), 21);
        let s = grid(&[".......", "...#...", "......."]);
        assert_eq!(s.open(1).count(), 0);
    }

    #[test]
    fn components_are_eight_connected() {
        let g = grid(&["#...#", ".#..#", "....#", "##..."]);
        let (_, sizes) = g.components();
        assert_eq!(sizes, vec![2, 3, 2]);
        let kept = g.remove_small_components(3);
        assert_eq!(kept, grid(&["....#", "....#", "....#", "....."]));
    }
}
