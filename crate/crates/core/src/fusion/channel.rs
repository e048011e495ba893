/// Undirected link between two agents, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(usize, usize);

impl LinkId {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }

    pub fn endpoints(&self) -> (usize, usize) {
        (self.0, self.1)
    }

    pub fn other(&self, agent: usize) -> Option<usize> {
        match agent {
            a if a == self.0 => Some(self.1),
            a if a == self.1 => Some(self.0),
            _ => None,
        }
    }
}

/// Channel-filter bookkeeping: the information both ends of a link
/// currently hold in common.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState<P> {
    link: LinkId,
    common: P,
}

impl<P> ChannelState<P> {
    /// A fresh channel whose common information is the shared prior.
    pub fn new(link: LinkId, prior: P) -> Self {
        Self { link, common: prior }
    }

    pub fn link(&self) -> LinkId {
        self.link
    }

    pub fn common(&self) -> &P {
        &self.common
    }

    /// After an exchange, the agreed fused pdf is exactly what both ends share.
    pub fn update(self, fused: P) -> Self {
        Self { link: self.link, common: fused }
    }
}
