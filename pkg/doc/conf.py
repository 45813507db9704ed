# -*- coding: utf-8 -*-
#
# sklearn-cvae documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

import sphinx_rtd_theme

sys.path.insert(0, os.path.abspath('..'))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc', 'sphinx.ext.autosummary',
    'numpydoc',
    'sphinx.ext.doctest',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
]

autodoc_default_options = {
    'members': True,
    'inherited-members': True
}

# numpydoc lists every method of the estimators already
numpydoc_show_class_members = False

templates_path = ['templates']
autosummary_generate = True

source_suffix = '.rst'
master_doc = 'index'

project = u'sklearn-cvae'
copyright = u'2020, sklearn-cvae developers'

from sklearn_cvae import __version__
version = __version__
release = __version__

exclude_patterns = ['_build', 'templates']

default_role = 'literal'
add_function_parentheses = False
pygments_style = 'sphinx'

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
html_short_title = 'sklearn-cvae'
htmlhelp_basename = 'sklearn-cvaedoc'

# -- Options for LaTeX / manual pages -------------------------------------

latex_documents = [
    ('index', 'sklearn-cvae.tex', u'sklearn-cvae Documentation',
     u'sklearn-cvae developers', 'manual'),
]

man_pages = [
    ('index', 'sklearn-cvae', u'sklearn-cvae Documentation',
     [u'sklearn-cvae developers'], 1)
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/{.major}'.format(
        sys.version_info), None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
    'sklearn': ('https://scikit-learn.org/stable', None)
}
